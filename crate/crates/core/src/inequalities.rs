//! Sharp inequality and rigidity-condition evaluation on level-set sample
//! data, with structured reports.

use serde::{Deserialize, Serialize};

use crate::config::StaticConfig;
use crate::error::{Error, Result};
use crate::sphere::unit_sphere_area;
use crate::surface::LevelSurface;

/// Satisfaction / equality thresholds. `tol` decides the satisfied flag,
/// `rigidity_tol` the equality-case flag; both are relative.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol: f64,
    pub rigidity_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            rigidity_tol: 1e-8,
        }
    }
}

/// Whether the sampled field is known to solve the static system. The
/// inequalities evaluate either way, but reports on formal fields carry a
/// caveat: the engine cannot certify staticity, only consume samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    StaticSolution,
    FormalField,
}

/// Admissible exponent range: the standard theorems need `p >= 3`; on
/// strictly regular sweeps the refined range `p >= 2 - 1/(n-1)` applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentPolicy {
    Standard,
    Refined,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InequalityParams {
    pub n: u32,
    pub m: f64,
    pub p: Option<f64>,
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub satisfied: bool,
    pub rigidity: bool,
    pub params: InequalityParams,
    pub tol: f64,
    pub rigidity_tol: f64,
    pub note: String,
}

/// Two-sided mass bound with its constituent reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassSandwich {
    pub lower: f64,
    pub mass: f64,
    pub upper: f64,
    pub reports: Vec<InequalityReport>,
}

/// Evaluation context bundling the background data, tolerances, provenance
/// and exponent policy.
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub config: StaticConfig,
    pub tols: Tolerances,
    pub provenance: Provenance,
    pub policy: ExponentPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpExponent {
    Finite(f64),
    Infinity,
}

/// Which Willmore-type statement to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WillmoreMode {
    /// Level sets of a static potential, `n >= 4`.
    Static,
    /// The boundary version through the intrinsic scalar curvature,
    /// `n >= 4`.
    Boundary,
    /// The classical inequality for closed hypersurfaces of flat space.
    Flat,
}

impl Evaluator {
    pub fn new(config: StaticConfig) -> Self {
        Self {
            config,
            tols: Tolerances::default(),
            provenance: Provenance::StaticSolution,
            policy: ExponentPolicy::Standard,
        }
    }

    pub fn with_tolerances(mut self, tols: Tolerances) -> Self {
        self.tols = tols;
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn with_policy(mut self, policy: ExponentPolicy) -> Self {
        self.policy = policy;
        self
    }

    fn nf(&self) -> f64 {
        self.config.nf()
    }

    fn check_p(&self, p: f64) -> Result<()> {
        let min_p = match self.policy {
            ExponentPolicy::Standard => 3.0,
            ExponentPolicy::Refined => 2.0 - 1.0 / (self.nf() - 1.0),
        };
        if p < min_p - 1e-12 {
            return Err(Error::Domain(format!(
                "exponent p = {p} below the admissible range (p >= {min_p})"
            )));
        }
        Ok(())
    }

    fn base_note(&self) -> String {
        match self.provenance {
            Provenance::StaticSolution => String::new(),
            Provenance::FormalField => "hypotheses-not-verified".to_string(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn report(
        &self,
        name: &str,
        lhs: f64,
        rhs: f64,
        p: Option<f64>,
        t: Option<f64>,
        rigidity_allowed: bool,
        extra_note: &str,
    ) -> InequalityReport {
        let slack = rhs - lhs;
        let scale = lhs.abs().max(rhs.abs());
        let satisfied = slack >= -self.tols.tol * scale;
        let near_equal = slack.abs() <= self.tols.rigidity_tol * scale;
        let mut note = self.base_note();
        if !extra_note.is_empty() {
            if !note.is_empty() {
                note.push_str("; ");
            }
            note.push_str(extra_note);
        }
        InequalityReport {
            name: name.to_string(),
            lhs,
            rhs,
            slack,
            satisfied,
            rigidity: rigidity_allowed && satisfied && near_equal,
            params: InequalityParams {
                n: self.config.n(),
                m: self.config.mass(),
                p,
                t,
            },
            tol: self.tols.tol,
            rigidity_tol: self.tols.rigidity_tol,
            note,
        }
    }

    fn require_boundary(&self, surface: &LevelSurface) -> Result<()> {
        if surface.level.abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "boundary-type evaluation needs the t = 0 level set, got t = {}",
                surface.level
            )));
        }
        Ok(())
    }

    /// The integral inequality on `{u = t}`:
    /// `(t/(1-t^2)) int 2 |Du|^p/(n-2) <= int |Du|^{p-1} H/(n-1)`.
    /// Equality at some `t in (0,1)` characterizes the rotationally
    /// symmetric solution, so the rigidity flag is gated on that range.
    pub fn integral_inequality(
        &self,
        surface: &LevelSurface,
        p: f64,
    ) -> Result<InequalityReport> {
        self.check_p(p)?;
        let t = surface.level;
        let nf = self.nf();
        let lhs = t / ((1.0 - t) * (1.0 + t))
            * surface.integrate(|s| 2.0 * s.du.powf(p) / (nf - 2.0));
        let rhs = surface.integrate(|s| s.du.powf(p - 1.0) * s.mean_curvature / (nf - 1.0));
        let rigidity_allowed = t > 0.0 && t < 1.0;
        Ok(self.report(
            "integral-inequality",
            lhs,
            rhs,
            Some(p),
            Some(t),
            rigidity_allowed,
            if rigidity_allowed {
                ""
            } else {
                "degenerate at t=0: both sides vanish on the totally geodesic boundary"
            },
        ))
    }

    /// Max-norm residuals of the two overdetermining pointwise conditions:
    /// the interior identity `(u/(1-u^2)) 2|Du|/(n-2) = H/(n-1)` and the
    /// boundary identity `(2|Du|/(n-2))^2 = R^{dM}/((n-1)(n-2))`.
    pub fn overdetermined_residuals(
        &self,
        surface: &LevelSurface,
    ) -> Result<(InequalityReport, InequalityReport)> {
        let t = surface.level;
        let nf = self.nf();
        let interior_residual = surface
            .samples
            .iter()
            .map(|s| {
                (t / ((1.0 - t) * (1.0 + t)) * 2.0 * s.du / (nf - 2.0)
                    - s.mean_curvature / (nf - 1.0))
                    .abs()
            })
            .fold(0.0f64, f64::max);
        let boundary_residual = surface
            .samples
            .iter()
            .map(|s| {
                ((2.0 * s.du / (nf - 2.0)).powi(2) - s.r_surface / ((nf - 1.0) * (nf - 2.0)))
                    .abs()
            })
            .fold(0.0f64, f64::max);
        let interior = self.report(
            "overdetermined-interior",
            interior_residual,
            0.0,
            None,
            Some(t),
            true,
            "max-norm residual; zero forces rotational symmetry",
        );
        let boundary = self.report(
            "overdetermined-boundary",
            boundary_residual,
            0.0,
            None,
            Some(t),
            true,
            "max-norm residual of the t=0 condition",
        );
        Ok((interior, boundary))
    }

    fn lp_of<F: Fn(&crate::surface::SurfaceSample) -> f64>(
        &self,
        surface: &LevelSurface,
        f: F,
        p: LpExponent,
    ) -> Result<f64> {
        match p {
            LpExponent::Finite(q) => surface.lp_norm(f, q),
            LpExponent::Infinity => surface.linf_norm(f),
        }
    }

    /// Sharp `L^p` gradient bound
    /// `(t/(1-t^2)) || 2 Du/(n-2) ||_p <= || H/(n-1) ||_p`, including the
    /// `p = infinity` limit, whose equality case is open: the rigidity flag
    /// is never set there.
    pub fn lp_bounds(&self, surface: &LevelSurface, p: LpExponent) -> Result<InequalityReport> {
        if let LpExponent::Finite(q) = p {
            self.check_p(q)?;
        }
        let t = surface.level;
        let nf = self.nf();
        let lhs = t / ((1.0 - t) * (1.0 + t))
            * self.lp_of(surface, |s| 2.0 * s.du / (nf - 2.0), p)?;
        let rhs = self.lp_of(surface, |s| s.mean_curvature / (nf - 1.0), p)?;
        let (name, rigidity_allowed, note, p_param) = match p {
            LpExponent::Finite(q) => (
                "lp-gradient-bound",
                t > 0.0 && t < 1.0,
                "",
                Some(q),
            ),
            LpExponent::Infinity => (
                "linf-gradient-bound",
                false,
                "rigidity undecided at p=infinity",
                None,
            ),
        };
        Ok(self.report(name, lhs, rhs, p_param, Some(t), rigidity_allowed, note))
    }

    /// Two-sided mass bound. Interior levels use the `K(n,p,t)` lower bound
    /// and the averaged mean-curvature upper bound; the `t = 0` boundary
    /// uses the intrinsic-curvature upper bound.
    pub fn mass_sandwich(&self, surface: &LevelSurface, p: f64) -> Result<MassSandwich> {
        self.check_p(p)?;
        let t = surface.level;
        if t.abs() <= 1e-12 {
            self.mass_sandwich_boundary(surface, p)
        } else if t > 0.0 && t < 1.0 {
            self.mass_sandwich_interior(surface, p)
        } else {
            Err(Error::Domain(format!(
                "mass sandwich needs t in [0, 1), got {t}"
            )))
        }
    }

    fn area_ratio(&self, surface: &LevelSurface) -> Result<f64> {
        Ok(surface.area() / unit_sphere_area(self.config.n())?)
    }

    fn mass_sandwich_interior(&self, surface: &LevelSurface, p: f64) -> Result<MassSandwich> {
        let t = surface.level;
        let nf = self.nf();
        let m = self.config.mass();
        let omt2 = (1.0 - t) * (1.0 + t);
        let ratio = self.area_ratio(surface)?;
        let k = surface.k_factor(self.config.n(), p)?;
        let lower = 0.5 * omt2 * k * ratio.powf((nf - 2.0) / (nf - 1.0));
        let h_norm = surface.averaged_lp_norm(|s| s.mean_curvature / (nf - 1.0), p)?;
        let upper = omt2 / (2.0 * t) * h_norm * ratio;
        let reports = vec![
            self.report("mass-lower", lower, m, Some(p), Some(t), true, ""),
            self.report("mass-upper", m, upper, Some(p), Some(t), true, ""),
        ];
        Ok(MassSandwich {
            lower,
            mass: m,
            upper,
            reports,
        })
    }

    fn mass_sandwich_boundary(&self, surface: &LevelSurface, p: f64) -> Result<MassSandwich> {
        self.require_boundary(surface)?;
        let nf = self.nf();
        let m = self.config.mass();
        let ratio = self.area_ratio(surface)?;
        let k = surface.k_factor(self.config.n(), p)?;
        let lower = 0.5 * k * ratio.powf((nf - 2.0) / (nf - 1.0));
        let r_norm = surface
            .averaged_lp_norm(|s| s.r_surface / ((nf - 1.0) * (nf - 2.0)), p / 2.0)?;
        let upper = 0.5 * r_norm.sqrt() * ratio;
        let reports = vec![
            self.report("mass-lower-boundary", lower, m, Some(p), Some(0.0), true, ""),
            self.report("mass-upper-boundary", m, upper, Some(p), Some(0.0), true, ""),
        ];
        Ok(MassSandwich {
            lower,
            mass: m,
            upper,
            reports,
        })
    }

    /// The Penrose inequality, its intrinsic upper companion, the
    /// inverse-radius sufficient condition (boundary surfaces), and the
    /// mean-curvature sufficient condition (interior surfaces).
    pub fn penrose_and_sufficient_conditions(
        &self,
        surface: &LevelSurface,
        p: f64,
    ) -> Result<Vec<InequalityReport>> {
        self.check_p(p)?;
        let t = surface.level;
        let nf = self.nf();
        let m = self.config.mass();
        let mut reports = Vec::new();
        if t.abs() <= 1e-12 {
            let ratio = self.area_ratio(surface)?;
            let penrose_lower = 0.5 * ratio.powf((nf - 2.0) / (nf - 1.0));
            reports.push(self.report(
                "penrose",
                penrose_lower,
                m,
                None,
                Some(0.0),
                true,
                "riemannian penrose inequality, connected minimal boundary",
            ));
            // Upper companion through the total intrinsic curvature.
            let total_r = surface.integrate(|s| s.r_surface);
            let under_root = ratio.powf(-(nf - 3.0) / (nf - 1.0)) * total_r
                / ((nf - 1.0) * (nf - 2.0) * unit_sphere_area(self.config.n())?);
            let upper = 0.5 * ratio.powf((nf - 2.0) / (nf - 1.0)) * under_root.max(0.0).sqrt();
            reports.push(self.report(
                "penrose-upper",
                m,
                upper,
                None,
                Some(0.0),
                true,
                "upper mass bound from the boundary scalar curvature",
            ));
            // Inverse-radius sufficient condition, pointwise in R^{dM}.
            let sqrt_ratio_max = surface
                .samples
                .iter()
                .map(|s| (s.r_surface / ((nf - 1.0) * (nf - 2.0))).abs().sqrt())
                .fold(0.0f64, f64::max);
            let rhs = (1.0 / ratio).powf(1.0 / (nf - 1.0));
            let mut rep = self.report(
                "inverse-radius-condition",
                sqrt_ratio_max,
                rhs,
                None,
                Some(0.0),
                true,
                "",
            );
            if rep.satisfied {
                rep.note = join_note(&rep.note, "sufficient condition satisfied: rigidity implied");
            }
            reports.push(rep);
        } else {
            let ratio = self.area_ratio(surface)?;
            let k = surface.k_factor(self.config.n(), p)?;
            let h_norm = surface.averaged_lp_norm(|s| s.mean_curvature / (nf - 1.0), p)?;
            let rhs = t * k * (1.0 / ratio).powf(1.0 / (nf - 1.0));
            let mut rep = self.report(
                "mean-curvature-sufficient",
                h_norm,
                rhs,
                Some(p),
                Some(t),
                true,
                "",
            );
            if rep.satisfied {
                rep.note = join_note(&rep.note, "sufficient condition satisfied: rigidity implied");
            }
            reports.push(rep);
        }
        Ok(reports)
    }

    /// `U_p''(0) = -((p-1)/2) (2m)^{(p-1)(n-1)/(n-2)}
    ///  int |Du|^{p-2} [ R^{dM} - 4 ((n-1)/(n-2)) |Du|^2 ] dsigma`,
    /// nonpositive on static solutions, zero exactly on Schwarzschild.
    pub fn boundary_second_derivative(&self, surface: &LevelSurface, p: f64) -> Result<f64> {
        if p < 3.0 - 1e-12 {
            return Err(Error::Domain(format!(
                "U_p''(0) needs p >= 3, got {p}"
            )));
        }
        self.require_boundary(surface)?;
        let nf = self.nf();
        let integral = surface.integrate(|s| {
            s.du.powf(p - 2.0) * (s.r_surface - 4.0 * (nf - 1.0) / (nf - 2.0) * s.du * s.du)
        });
        Ok(-upp_prefactor(p, self.config) * integral)
    }

    /// Willmore-type inequalities; see [`WillmoreMode`].
    pub fn willmore(&self, surface: &LevelSurface, mode: WillmoreMode) -> Result<InequalityReport> {
        let nf = self.nf();
        let n = self.config.n();
        let t = surface.level;
        match mode {
            WillmoreMode::Static => {
                if n < 4 {
                    return Err(Error::Domain(
                        "static-mode Willmore inequality needs n >= 4".into(),
                    ));
                }
                if !(t > 0.0 && t < 1.0) {
                    return Err(Error::Domain(format!(
                        "static-mode Willmore inequality needs t in (0,1), got {t}"
                    )));
                }
                let lhs = unit_sphere_area(n)?.powf(1.0 / (nf - 1.0));
                let rhs = surface.lp_norm(|s| s.mean_curvature / (nf - 1.0), nf - 1.0)? / t;
                Ok(self.report("willmore-static", lhs, rhs, None, Some(t), true, ""))
            }
            WillmoreMode::Boundary => {
                if n < 4 {
                    return Err(Error::Domain(
                        "boundary-mode Willmore inequality needs n >= 4".into(),
                    ));
                }
                self.require_boundary(surface)?;
                let lhs = unit_sphere_area(n)?.powf(1.0 / (nf - 1.0));
                let rhs = surface
                    .lp_norm(
                        |s| s.r_surface / ((nf - 1.0) * (nf - 2.0)),
                        (nf - 1.0) / 2.0,
                    )?
                    .sqrt();
                Ok(self.report("willmore-boundary", lhs, rhs, None, Some(0.0), true, ""))
            }
            WillmoreMode::Flat => {
                let lhs = unit_sphere_area(n)?.powf(1.0 / (nf - 1.0));
                let rhs = surface.lp_norm(|s| s.mean_curvature / (nf - 1.0), nf - 1.0)?;
                Ok(self.report(
                    "willmore-flat",
                    lhs,
                    rhs,
                    None,
                    Some(t),
                    true,
                    "classical flat-space inequality",
                ))
            }
        }
    }

    /// Renormalized Einstein-Hilbert functional
    /// `E = |Sigma|^{-(n-3)/(n-1)} int R^Sigma dsigma`; scale invariant by
    /// construction.
    pub fn einstein_hilbert(&self, surface: &LevelSurface) -> Result<f64> {
        let nf = self.nf();
        let area = surface.area();
        if !(area > 0.0) {
            return Err(Error::DegenerateSurface("empty surface".into()));
        }
        Ok(area.powf(-(nf - 3.0) / (nf - 1.0)) * surface.integrate(|s| s.r_surface))
    }

    /// Comparison `E(round S^{n-1}) <= E(dM)` for `n >= 4`. Whether the
    /// sampled metric is Yamabe is not decidable from samples; the report
    /// says so.
    pub fn yamabe_comparison(&self, surface: &LevelSurface) -> Result<InequalityReport> {
        let n = self.config.n();
        if n < 4 {
            return Err(Error::Domain(
                "Einstein-Hilbert comparison needs n >= 4".into(),
            ));
        }
        let nf = self.nf();
        let round = (nf - 1.0) * (nf - 2.0) * unit_sphere_area(n)?.powf(2.0 / (nf - 1.0));
        let e = self.einstein_hilbert(surface)?;
        Ok(self.report(
            "yamabe-comparison",
            round,
            e,
            None,
            Some(surface.level),
            true,
            "yamabe property of the sampled metric not verified",
        ))
    }

    /// The 3-dimensional uniqueness chain as a report template: connected
    /// boundary, the Gauss-Bonnet bound on the total curvature, and the
    /// resulting Penrose equality. It asserts the numerical equality chain,
    /// it does not prove uniqueness.
    pub fn black_hole_uniqueness_chain(
        &self,
        surface: &LevelSurface,
    ) -> Result<Vec<InequalityReport>> {
        if self.config.n() != 3 {
            return Err(Error::Domain(
                "the uniqueness chain template is 3-dimensional".into(),
            ));
        }
        self.require_boundary(surface)?;
        let mut reports = Vec::new();
        reports.push(self.report(
            "connected-boundary",
            surface.components as f64,
            1.0,
            None,
            Some(0.0),
            true,
            "component count of the extracted boundary",
        ));
        let total_r = surface.integrate(|s| s.r_surface);
        reports.push(self.report(
            "gauss-bonnet-bound",
            total_r,
            8.0 * std::f64::consts::PI,
            None,
            Some(0.0),
            true,
            "int R^{dM} = 4 pi chi <= 8 pi for connected surfaces",
        ));
        let ratio = self.area_ratio(surface)?;
        reports.push(self.report(
            "penrose-equality",
            0.5 * ratio.sqrt(),
            self.config.mass(),
            None,
            Some(0.0),
            true,
            "equality chain forced by the two bounds",
        ));
        Ok(reports)
    }
}

fn join_note(base: &str, extra: &str) -> String {
    if base.is_empty() {
        extra.to_string()
    } else {
        format!("{base}; {extra}")
    }
}

fn upp_prefactor(p: f64, config: StaticConfig) -> f64 {
    (p - 1.0) / 2.0 * (2.0 * config.mass()).powf(config.prefactor_exponent(p))
}

/// Serializes reports as a JSON array with stable field names.
pub fn reports_to_json(reports: &[InequalityReport]) -> String {
    serde_json::to_string_pretty(reports).expect("report serialization cannot fail")
}

/// Human-readable aligned text table.
pub fn reports_to_text(reports: &[InequalityReport]) -> String {
    let mut out = String::new();
    let name_w = reports
        .iter()
        .map(|r| r.name.len())
        .max()
        .unwrap_or(4)
        .max(4);
    out.push_str(&format!(
        "{:<name_w$}  {:>24}  {:>24}  {:>12}  {:>5}  {:>5}  note\n",
        "name", "lhs", "rhs", "slack", "sat", "rig"
    ));
    for r in reports {
        out.push_str(&format!(
            "{:<name_w$}  {:>24.16e}  {:>24.16e}  {:>12.3e}  {:>5}  {:>5}  {}\n",
            r.name, r.lhs, r.rhs, r.slack, r.satisfied, r.rigidity, r.note
        ));
    }
    out
}
