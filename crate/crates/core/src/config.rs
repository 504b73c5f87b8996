use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance enforced between the two halves of a [`LevelValue`].
const LEVEL_CONSISTENCY_TOL: f64 = 1e-14;

/// Background data shared by every functional: dimension `n`, ADM mass `m`,
/// and the constant Dirichlet value `u0` of the potential on the inner
/// boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticConfig {
    n: u32,
    m: f64,
    u0: f64,
}

impl StaticConfig {
    pub fn new(n: u32, m: f64, u0: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Config(format!("dimension n = {n} must be >= 3")));
        }
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Config(format!("mass m = {m} must be positive")));
        }
        if !(0.0..1.0).contains(&u0) {
            return Err(Error::Config(format!(
                "Dirichlet value u0 = {u0} must lie in [0, 1)"
            )));
        }
        Ok(Self { n, m, u0 })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn nf(&self) -> f64 {
        f64::from(self.n)
    }

    pub fn mass(&self) -> f64 {
        self.m
    }

    pub fn u0(&self) -> f64 {
        self.u0
    }

    /// `2m / (1 - t^2)`, the base of the renormalizing prefactor. On a
    /// Schwarzschild background this equals `r^{n-2}` at the level `t`.
    pub fn prefactor_base(&self, t: f64) -> f64 {
        2.0 * self.m / (1.0 - t * t)
    }

    /// Exponent `(p-1)(n-1)/(n-2)` of the renormalizing prefactor.
    pub fn prefactor_exponent(&self, p: f64) -> f64 {
        (p - 1.0) * (self.nf() - 1.0) / (self.nf() - 2.0)
    }

    /// Full prefactor `(2m/(1-t^2))^{(p-1)(n-1)/(n-2)}`.
    pub fn prefactor(&self, t: f64, p: f64) -> f64 {
        self.prefactor_base(t).powf(self.prefactor_exponent(p))
    }
}

/// A potential level described both by the original value `t` and by the
/// conformal value `s = log((1+t)/(1-t))`. Both are kept to avoid repeated
/// transcendental round-trips; consistency is enforced at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelValue {
    t: f64,
    s: f64,
}

impl LevelValue {
    /// Builds the pair from the potential value `t in [0, 1)`.
    pub fn from_t(t: f64) -> Result<Self> {
        if !(-1.0..1.0).contains(&t) {
            return Err(Error::Domain(format!(
                "level t = {t} outside (-1, 1); conformal value would be infinite"
            )));
        }
        Ok(Self {
            t,
            s: crate::conformal::to_phi(t)?,
        })
    }

    /// Builds the pair from the conformal value `s`, so `t = tanh(s/2)`.
    pub fn from_s(s: f64) -> Self {
        Self {
            t: crate::conformal::from_phi(s),
            s,
        }
    }

    /// Accepts an externally computed pair, verifying `s = log((1+t)/(1-t))`
    /// to relative tolerance 1e-14.
    pub fn from_pair(t: f64, s: f64) -> Result<Self> {
        let expect = crate::conformal::to_phi(t)?;
        let scale = expect.abs().max(1.0);
        if (expect - s).abs() > LEVEL_CONSISTENCY_TOL * scale {
            return Err(Error::Domain(format!(
                "inconsistent level pair: t = {t} maps to s = {expect}, got {s}"
            )));
        }
        Ok(Self { t, s })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_accepts_valid_data() {
        let c = StaticConfig::new(3, 1.0, 0.0).unwrap();
        assert_eq!(c.n(), 3);
        assert_eq!(c.mass(), 1.0);
        assert_eq!(c.u0(), 0.0);
    }

    #[test]
    fn config_rejects_bad_data() {
        assert!(StaticConfig::new(2, 1.0, 0.0).is_err());
        assert!(StaticConfig::new(3, 0.0, 0.0).is_err());
        assert!(StaticConfig::new(3, -1.0, 0.0).is_err());
        assert!(StaticConfig::new(3, 1.0, 1.0).is_err());
        assert!(StaticConfig::new(3, 1.0, -0.1).is_err());
    }

    #[test]
    fn level_value_round_trips() {
        for &t in &[0.0, 0.1, 0.6, 0.95, 0.999] {
            let lv = LevelValue::from_t(t).unwrap();
            let back = LevelValue::from_s(lv.s());
            assert!((back.t() - t).abs() <= 1e-14);
        }
        // u = tanh(1) maps to s = 2
        let lv = LevelValue::from_t(1.0_f64.tanh()).unwrap();
        assert!((lv.s() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn level_value_pair_consistency() {
        assert!(LevelValue::from_pair(0.6, (4.0_f64).ln()).is_ok());
        assert!(LevelValue::from_pair(0.6, 1.4).is_err());
        assert!(LevelValue::from_t(1.0).is_err());
    }

    #[test]
    fn prefactor_matches_schwarzschild_radius_power() {
        // On Schwarzschild, 2m/(1-t^2) = r^{n-2}.
        let c = StaticConfig::new(3, 1.0, 0.0).unwrap();
        assert!((c.prefactor_base(0.6) - 3.125).abs() < 1e-15);
        assert!((c.prefactor(0.6, 3.0) - 3.125_f64.powi(4)).abs() < 1e-10);
    }
}
