//! Closed-form oracle for the rotationally symmetric solution
//! `u = sqrt(1 - 2m |x|^{2-n})` in dimension `n >= 3`. Every quantity used
//! by the level-set machinery is available here to rounding accuracy.

use serde::{Deserialize, Serialize};

use crate::config::StaticConfig;
use crate::error::{Error, Result};
use crate::sphere::unit_sphere_area;

/// Positive-base power with an explicit domain guard; the fractional
/// exponents `1/(n-2)` make negative bases a silent-NaN hazard otherwise.
fn pow_pos(base: f64, exponent: f64) -> f64 {
    debug_assert!(base > 0.0, "pow_pos needs a positive base, got {base}");
    (exponent * base.ln()).exp()
}

/// Closed-form quantities on the level set `{u = t}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LevelQuantities {
    pub radius: f64,
    pub u: f64,
    pub du: f64,
    pub mean_curvature: f64,
    pub area: f64,
    pub r_surface: f64,
    /// Squared norm of the tangential second fundamental form,
    /// `(n-1) (u/r)^2`.
    pub h2: f64,
}

/// Pointwise second-derivative data of the potential at radius `r`, in the
/// covariant sense of the background metric.
#[derive(Debug, Clone, Copy)]
pub struct HessianQuantities {
    /// `D^2 u(nu, nu) = -(n-1) m (n-2) u r^{-n}`.
    pub hess_nn: f64,
    /// `|D^2 u|^2 = n (n-1) (m (n-2) u r^{-n})^2`.
    pub hess_sq: f64,
    /// `D^2 u(Du, Du) = |Du|^2 D^2 u(nu, nu)`.
    pub hess_du_du: f64,
}

/// Exact conformal-side constants of the model (the round half-cylinder).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConformalExact {
    /// `|nabla phi|_g = (n-2) (2m)^{-1/(n-2)}`, constant on all of `M`.
    pub phi_gradient_norm: f64,
    /// `Phi_p = (2m)^{(n-1-p)/(n-2)} (n-2)^p |S^{n-1}|`.
    pub phi_p_value: f64,
    /// Cross-section area in the conformal metric,
    /// `(2m)^{(n-1)/(n-2)} |S^{n-1}|`.
    pub cross_section_area_g: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SchwarzschildModel {
    config: StaticConfig,
    horizon_radius: f64,
}

impl SchwarzschildModel {
    /// The model normalizes `u0 = 0`: the potential vanishes at the horizon
    /// `r_h` with `r_h^{n-2} = 2m`. Nonzero Dirichlet values are handled by
    /// restricting the level grid, not by a different model.
    pub fn new(n: u32, m: f64) -> Result<Self> {
        let config = StaticConfig::new(n, m, 0.0)?;
        let horizon_radius = pow_pos(2.0 * m, 1.0 / (config.nf() - 2.0));
        Ok(Self {
            config,
            horizon_radius,
        })
    }

    pub fn config(&self) -> &StaticConfig {
        &self.config
    }

    pub fn n(&self) -> u32 {
        self.config.n()
    }

    pub fn mass(&self) -> f64 {
        self.config.mass()
    }

    pub fn horizon_radius(&self) -> f64 {
        self.horizon_radius
    }

    /// Inverts `u(r) = t`: the unique `r >= r_h` with
    /// `r^{n-2} = 2m / (1 - t^2)`.
    pub fn radius_of_level(&self, t: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::Domain(format!(
                "Schwarzschild level t = {t} outside [0, 1)"
            )));
        }
        let nf = self.config.nf();
        Ok(pow_pos(
            2.0 * self.mass() / (1.0 - t * t),
            1.0 / (nf - 2.0),
        ))
    }

    /// `u(r) = sqrt(1 - 2m r^{2-n})` for `r >= r_h`.
    pub fn potential(&self, r: f64) -> Result<f64> {
        if r < self.horizon_radius * (1.0 - 1e-12) {
            return Err(Error::Domain(format!(
                "radius r = {r} inside the horizon r_h = {}",
                self.horizon_radius
            )));
        }
        Ok(self.one_minus_u2(r).min(1.0).mul_add(-1.0, 1.0).max(0.0).sqrt())
    }

    /// `1 - u^2 = 2m r^{2-n}`, the cancellation-free form used by every
    /// conformal conversion.
    pub fn one_minus_u2(&self, r: f64) -> f64 {
        2.0 * self.mass() * pow_pos(r, 2.0 - self.config.nf())
    }

    /// `|Du|(r) = m (n-2) r^{1-n}`.
    pub fn du_at_radius(&self, r: f64) -> f64 {
        let nf = self.config.nf();
        self.mass() * (nf - 2.0) * pow_pos(r, 1.0 - nf)
    }

    /// All level-set quantities at `{u = t}`.
    pub fn level_quantities(&self, t: f64) -> Result<LevelQuantities> {
        let r = self.radius_of_level(t)?;
        let nf = self.config.nf();
        let area = unit_sphere_area(self.n())? * pow_pos(r, nf - 1.0);
        Ok(LevelQuantities {
            radius: r,
            u: t,
            du: self.du_at_radius(r),
            mean_curvature: (nf - 1.0) * t / r,
            area,
            r_surface: (nf - 1.0) * (nf - 2.0) / (r * r),
            h2: (nf - 1.0) * (t / r) * (t / r),
        })
    }

    /// Covariant second-derivative data at `{u = t}`.
    pub fn hessian_quantities(&self, t: f64) -> Result<HessianQuantities> {
        let r = self.radius_of_level(t)?;
        let nf = self.config.nf();
        let scale = self.mass() * (nf - 2.0) * t * pow_pos(r, -nf);
        let hess_nn = -(nf - 1.0) * scale;
        let hess_sq = nf * (nf - 1.0) * scale * scale;
        let du = self.du_at_radius(r);
        Ok(HessianQuantities {
            hess_nn,
            hess_sq,
            hess_du_du: du * du * hess_nn,
        })
    }

    /// The exact renormalized p-capacity, `m^p (n-2)^p |S^{n-1}|`,
    /// independent of the level.
    pub fn up_exact(&self, t: f64, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::Domain(format!(
                "Schwarzschild level t = {t} outside [0, 1)"
            )));
        }
        if !(p >= 0.0) {
            return Err(Error::Domain(format!("U_p needs p >= 0, got {p}")));
        }
        let nf = self.config.nf();
        Ok(pow_pos(self.mass() * (nf - 2.0), p) * unit_sphere_area(self.n())?)
    }

    /// Conformal-side constants; see [`ConformalExact`].
    pub fn conformal_exact(&self, p: f64) -> Result<ConformalExact> {
        if !(p >= 0.0) {
            return Err(Error::Domain(format!("Phi_p needs p >= 0, got {p}")));
        }
        let nf = self.config.nf();
        let two_m = 2.0 * self.mass();
        let area = unit_sphere_area(self.n())?;
        Ok(ConformalExact {
            phi_gradient_norm: (nf - 2.0) * pow_pos(two_m, -1.0 / (nf - 2.0)),
            phi_p_value: pow_pos(two_m, (nf - 1.0 - p) / (nf - 2.0))
                * pow_pos(nf - 2.0, p)
                * area,
            cross_section_area_g: pow_pos(two_m, (nf - 1.0) / (nf - 2.0)) * area,
        })
    }
}
