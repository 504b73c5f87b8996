//! Weighted sample sets over level surfaces and the averaged norms built on
//! them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One quadrature sample of a level surface.
///
/// `normal` is the unit vector `Du/|Du|`; `weight` is the area element
/// carried by the sample; `h2` is the squared norm of the tangential second
/// fundamental form `D^2 u|_tan / |Du|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
    pub weight: f64,
    pub du: f64,
    pub mean_curvature: f64,
    pub h2: f64,
    pub r_surface: f64,
}

/// A level surface as a weighted sample set, plus the estimated measure of
/// the near-critical region that was removed from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSurface {
    pub level: f64,
    pub samples: Vec<SurfaceSample>,
    pub excluded_area: f64,
    /// Connected components of the extracted surface, when the backend can
    /// count them (triangulation); 1 otherwise.
    pub components: usize,
}

impl LevelSurface {
    pub fn new(level: f64, samples: Vec<SurfaceSample>) -> Self {
        Self {
            level,
            samples,
            excluded_area: 0.0,
            components: 1,
        }
    }

    /// Total sampled area `sum of weights`.
    pub fn area(&self) -> f64 {
        self.samples.iter().map(|s| s.weight).sum()
    }

    /// Surface integral of `f` over the samples.
    pub fn integrate<F: Fn(&SurfaceSample) -> f64>(&self, f: F) -> f64 {
        self.samples.iter().map(|s| s.weight * f(s)).sum()
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.samples.is_empty() || !(self.area() > 0.0) {
            return Err(Error::DegenerateSurface(format!(
                "level {}: empty sample set or vanishing area",
                self.level
            )));
        }
        Ok(())
    }

    /// Plain `L^p` norm `( int |f|^p dsigma )^{1/p}` over the samples.
    pub fn lp_norm<F: Fn(&SurfaceSample) -> f64>(&self, f: F, p: f64) -> Result<f64> {
        self.require_nonempty()?;
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("L^p norm needs p >= 1, got {p}")));
        }
        Ok(self.integrate(|s| f(s).abs().powf(p)).powf(1.0 / p))
    }

    /// `L^infinity` norm: max of `|f|` over the samples.
    pub fn linf_norm<F: Fn(&SurfaceSample) -> f64>(&self, f: F) -> Result<f64> {
        self.require_nonempty()?;
        Ok(self
            .samples
            .iter()
            .map(|s| f(s).abs())
            .fold(0.0, f64::max))
    }

    /// Area-averaged norm `[ (1/|Sigma|) int |f|^p dsigma ]^{1/p}`.
    pub fn averaged_lp_norm<F: Fn(&SurfaceSample) -> f64>(&self, f: F, p: f64) -> Result<f64> {
        self.require_nonempty()?;
        if !(p >= 1.0) {
            return Err(Error::Domain(format!(
                "averaged L^p norm needs p >= 1, got {p}"
            )));
        }
        let area = self.area();
        Ok((self.integrate(|s| f(s).abs().powf(p)) / area).powf(1.0 / p))
    }

    /// The factor
    /// `K(n, p, t) = [ ||Du||_{L^1_0} / ||Du||_{L^p_0} ]^{p(n-2)/((p-1)(n-1))}`
    /// entering the lower mass bound. Always in `(0, 1]` by Jensen, with
    /// equality exactly when `|Du|` is constant over the samples.
    pub fn k_factor(&self, n: u32, p: f64) -> Result<f64> {
        self.require_nonempty()?;
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("K(n,p,t) needs p >= 1, got {p}")));
        }
        if p == 1.0 {
            return Err(Error::Domain(
                "K(n,p,t) is singular at p = 1 (exponent p(n-2)/((p-1)(n-1)) diverges)".into(),
            ));
        }
        let l1 = self.averaged_lp_norm(|s| s.du, 1.0)?;
        let lp = self.averaged_lp_norm(|s| s.du, p)?;
        if !(lp > 0.0) {
            return Err(Error::DegenerateSurface(format!(
                "level {}: |Du| vanishes identically on the sample set",
                self.level
            )));
        }
        let nf = f64::from(n);
        let exponent = p * (nf - 2.0) / ((p - 1.0) * (nf - 1.0));
        Ok((l1 / lp).powf(exponent))
    }
}
