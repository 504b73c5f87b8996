//! Level-surface extraction and the level-set functionals computed on the
//! extracted samples: the renormalized capacities, their conformal
//! counterparts, and the derivative formulas, all by surface quadrature.

pub mod marching;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::StaticConfig;
use crate::conformal;
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::harmonic::{Jet2, MultiCenterField};
use crate::schwarzschild::SchwarzschildModel;
use crate::sphere::SphereRule;
use crate::surface::{LevelSurface, SurfaceSample};
use marching::{component_count, polygonize, SampleBox, Triangle};

/// A potential whose level sets the engine can extract.
#[derive(Debug, Clone)]
pub enum Field {
    Schwarzschild(SchwarzschildModel),
    MultiCenter(MultiCenterField),
    Grid(GridField),
}

impl Field {
    pub fn dim(&self) -> u32 {
        match self {
            Field::Schwarzschild(m) => m.n(),
            Field::MultiCenter(f) => f.n(),
            Field::Grid(_) => 3,
        }
    }

    /// The background data naturally attached to the field: the model's own
    /// config for Schwarzschild, the total weight as mass for flat fields.
    /// Grid fields carry no mass of their own; callers supply one.
    pub fn default_config(&self) -> Result<StaticConfig> {
        match self {
            Field::Schwarzschild(m) => Ok(*m.config()),
            Field::MultiCenter(f) => StaticConfig::new(f.n(), f.total_mass(), 0.0),
            Field::Grid(_) => Err(Error::Config(
                "grid fields need an explicit StaticConfig (mass is not stored)".into(),
            )),
        }
    }
}

/// Extraction backend selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Pick per field: exact spheres for rotationally symmetric fields,
    /// star-shaped ray quadrature for multi-center fields, triangulation
    /// for grids.
    Auto,
    /// Exact coordinate sphere with a product rule on the unit sphere.
    RadialExact,
    /// Per-ray root finding from an interior origin; valid while the level
    /// set is star-shaped around it.
    StarShaped,
    /// Marching-tetrahedra polygonization with centroid sampling (3-D).
    Triangulation,
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub backend: Backend,
    /// Gauss-Legendre order for each polar angle of the sphere rule.
    pub polar_order: usize,
    /// Uniform rule order for the azimuth.
    pub azimuth_order: usize,
    /// Cells per axis for the triangulation backend.
    pub resolution: usize,
    /// Bounding-box padding factor for the triangulation backend.
    pub box_pad: f64,
    /// Near-critical exclusion threshold, relative to the largest sampled
    /// `|Du|`.
    pub eps_crit_rel: f64,
    /// Excluded area above this fraction of the total flags the surface
    /// degenerate.
    pub max_excluded_frac: f64,
    /// Ray origin for the star-shaped backend; defaults to the weighted
    /// centroid of the centers.
    pub star_origin: Option<Vec<f64>>,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Auto,
            polar_order: 64,
            azimuth_order: 128,
            resolution: 128,
            box_pad: 1.2,
            eps_crit_rel: 1e-6,
            max_excluded_frac: 0.1,
            star_origin: None,
        }
    }
}

impl ExtractOptions {
    fn sphere_rule(&self, n: u32) -> Result<SphereRule> {
        // Keep high-dimensional product rules at a sane node count; the
        // radial backends integrate constants, where any order is exact.
        let (polar, azimuth) = if n <= 3 {
            (self.polar_order, self.azimuth_order)
        } else {
            (self.polar_order.min(24), self.azimuth_order.min(48))
        };
        SphereRule::new(n, polar, azimuth)
    }
}

/// Extracts the level surface `{u = t}` of the field.
pub fn extract(field: &Field, t: f64, opts: &ExtractOptions) -> Result<LevelSurface> {
    let backend = match (opts.backend, field) {
        (Backend::Auto, Field::Schwarzschild(_)) => Backend::RadialExact,
        (Backend::Auto, Field::MultiCenter(f)) => {
            if f.is_monopole() {
                Backend::RadialExact
            } else {
                Backend::StarShaped
            }
        }
        (Backend::Auto, Field::Grid(_)) => Backend::Triangulation,
        (b, _) => b,
    };
    match (backend, field) {
        (Backend::RadialExact, Field::Schwarzschild(model)) => {
            radial_schwarzschild(model, t, opts)
        }
        (Backend::RadialExact, Field::MultiCenter(f)) if f.is_monopole() => {
            radial_monopole(f, t, opts)
        }
        (Backend::RadialExact, _) => Err(Error::Config(
            "radial backend needs a rotationally symmetric field".into(),
        )),
        (Backend::StarShaped, Field::MultiCenter(f)) => star_shaped(f, t, opts),
        (Backend::StarShaped, _) => Err(Error::Config(
            "star-shaped backend is only available for multi-center fields".into(),
        )),
        (Backend::Triangulation, Field::Schwarzschild(model)) => {
            triangulation_schwarzschild(model, t, opts)
        }
        (Backend::Triangulation, Field::MultiCenter(f)) => triangulation_multicenter(f, t, opts),
        (Backend::Triangulation, Field::Grid(g)) => triangulation_grid(g, t, opts),
        (Backend::Auto, _) => unreachable!(),
    }
}

fn radial_schwarzschild(
    model: &SchwarzschildModel,
    t: f64,
    opts: &ExtractOptions,
) -> Result<LevelSurface> {
    let q = model.level_quantities(t)?;
    let rule = opts.sphere_rule(model.n())?;
    let rpow = q.radius.powi(model.n() as i32 - 1);
    let samples = rule
        .directions
        .iter()
        .zip(&rule.weights)
        .map(|(dir, w)| SurfaceSample {
            point: dir.iter().map(|c| c * q.radius).collect(),
            normal: dir.clone(),
            weight: w * rpow,
            du: q.du,
            mean_curvature: q.mean_curvature,
            h2: q.h2,
            r_surface: q.r_surface,
        })
        .collect();
    Ok(LevelSurface::new(t, samples))
}

fn radial_monopole(
    field: &MultiCenterField,
    t: f64,
    opts: &ExtractOptions,
) -> Result<LevelSurface> {
    if t >= 1.0 {
        return Err(Error::LevelNotAttained { level: t });
    }
    let n = field.n();
    let nf = f64::from(n);
    let (center, m) = &field.centers()[0];
    let rho = (m / (1.0 - t)).powf(1.0 / (nf - 2.0));
    let du = m * (nf - 2.0) * rho.powf(1.0 - nf);
    let h = (nf - 1.0) / rho;
    let h2 = (nf - 1.0) / (rho * rho);
    let r_surface = (nf - 1.0) * (nf - 2.0) / (rho * rho);
    let rule = opts.sphere_rule(n)?;
    let rpow = rho.powf(nf - 1.0);
    let samples = rule
        .directions
        .iter()
        .zip(&rule.weights)
        .map(|(dir, w)| SurfaceSample {
            point: dir
                .iter()
                .zip(center.iter())
                .map(|(c, o)| o + c * rho)
                .collect(),
            normal: dir.clone(),
            weight: w * rpow,
            du,
            mean_curvature: h,
            h2,
            r_surface,
        })
        .collect();
    Ok(LevelSurface::new(t, samples))
}

/// Pointwise geometric data of a flat-background level set from the jet of
/// the potential: `H = (laplacian - D^2u(nu,nu))/|Du|`, tangential second
/// fundamental form through the projector, and the Gauss scalar curvature
/// `R = H^2 - |h|^2`.
pub fn flat_sample_geometry(jet: &Jet2) -> (f64, f64, f64, f64, DVector<f64>) {
    let du = jet.du();
    let nu = &jet.gradient / du;
    let a_nu = &jet.hessian * &nu;
    let ann = nu.dot(&a_nu);
    let h = (jet.laplacian() - ann) / du;
    // P A P with P = I - nu nu^T.
    let dim = nu.len();
    let mut frob2 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let v = jet.hessian[(i, j)] - nu[i] * a_nu[j] - a_nu[i] * nu[j]
                + ann * nu[i] * nu[j];
            frob2 += v * v;
        }
    }
    let h2 = frob2 / (du * du);
    let r_surface = h * h - h2;
    (du, h, h2, r_surface, nu)
}

fn star_shaped(field: &MultiCenterField, t: f64, opts: &ExtractOptions) -> Result<LevelSurface> {
    if t >= 1.0 {
        return Err(Error::LevelNotAttained { level: t });
    }
    let n = field.n();
    let nf = f64::from(n);
    let dim = n as usize;
    let origin: Vec<f64> = match &opts.star_origin {
        Some(o) => {
            if o.len() != dim {
                return Err(Error::Config("star origin has wrong dimension".into()));
            }
            o.clone()
        }
        None => {
            let total = field.total_mass();
            let mut o = vec![0.0; dim];
            for (c, m) in field.centers() {
                for d in 0..dim {
                    o[d] += m / total * c[d];
                }
            }
            o
        }
    };
    let u_origin = field.value(&origin);
    if u_origin >= t {
        return Err(Error::DegenerateSurface(format!(
            "star origin has u = {u_origin} >= t = {t}; level set is not star-shaped around it"
        )));
    }
    let rule = opts.sphere_rule(n)?;
    let rho_guess = (field.total_mass() / (1.0 - t)).powf(1.0 / (nf - 2.0));

    type RayHit = (Vec<f64>, f64, f64, Jet2);
    let raw: Vec<Result<RayHit>> = rule
        .directions
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(dir, w)| {
            let at = |rho: f64| -> Vec<f64> {
                (0..dim).map(|d| origin[d] + rho * dir[d]).collect()
            };
            // Bracket the crossing: u < t near the origin, u -> 1 at
            // infinity.
            let mut hi = rho_guess.max(1e-3);
            let mut grow = 0;
            while field.value(&at(hi)) < t {
                hi *= 2.0;
                grow += 1;
                if grow > 60 {
                    return Err(Error::LevelNotAttained { level: t });
                }
            }
            let mut lo = 1e-9;
            if field.value(&at(lo)) >= t {
                return Err(Error::DegenerateSurface(
                    "ray leaves the level set immediately; not star-shaped".into(),
                ));
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if field.value(&at(mid)) < t {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 * hi {
                    break;
                }
            }
            let rho = 0.5 * (lo + hi);
            let x = at(rho);
            let jet = field.evaluate(&x)?;
            Ok((x, rho, *w, jet))
        })
        .collect();

    let mut entries = Vec::with_capacity(raw.len());
    for r in raw {
        entries.push(r?);
    }
    let max_du = entries
        .iter()
        .map(|(_, _, _, jet)| jet.du())
        .fold(0.0f64, f64::max);
    let eps = opts.eps_crit_rel * max_du;

    let mut samples = Vec::with_capacity(entries.len());
    let mut excluded = 0.0;
    for (x, rho, w, jet) in entries {
        let du = jet.du();
        let solid = w * rho.powf(nf - 1.0);
        if du <= eps {
            excluded += solid; // projected-area estimate for the dropped patch
            continue;
        }
        let (du, h, h2, r_surface, nu) = flat_sample_geometry(&jet);
        let cos_gamma = (0..dim).map(|d| nu[d] * (x[d] - origin[d]) / rho).sum::<f64>();
        if cos_gamma <= 1e-10 {
            return Err(Error::DegenerateSurface(format!(
                "normal orthogonal to the ray at rho = {rho}; surface not star-shaped"
            )));
        }
        samples.push(SurfaceSample {
            point: x,
            normal: nu.as_slice().to_vec(),
            weight: solid / cos_gamma,
            du,
            mean_curvature: h,
            h2,
            r_surface,
        });
    }
    finish_surface(t, samples, excluded, 1, opts)
}

fn finish_surface(
    t: f64,
    samples: Vec<SurfaceSample>,
    excluded: f64,
    components: usize,
    opts: &ExtractOptions,
) -> Result<LevelSurface> {
    let mut surface = LevelSurface::new(t, samples);
    surface.excluded_area = excluded;
    surface.components = components;
    let total = surface.area() + excluded;
    if surface.samples.is_empty() || !(total > 0.0) {
        return Err(Error::LevelNotAttained { level: t });
    }
    if excluded > opts.max_excluded_frac * total {
        return Err(Error::DegenerateSurface(format!(
            "excluded area {excluded:.3e} exceeds {} of the total {total:.3e} at t = {t}",
            opts.max_excluded_frac
        )));
    }
    Ok(surface)
}

fn triangulation_schwarzschild(
    model: &SchwarzschildModel,
    t: f64,
    opts: &ExtractOptions,
) -> Result<LevelSurface> {
    if model.n() != 3 {
        return Err(Error::Config("triangulation backend is 3-D only".into()));
    }
    let radius = model.radius_of_level(t)?;
    let m = model.mass();
    // March the squared potential q = 1 - 2m/r: it has the same level sets
    // ({u = t} = {q = t^2}) but stays analytic across the horizon, where u
    // itself has a square-root profile that defeats linear interpolation.
    let value = move |p: &[f64; 3]| -> f64 {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt().max(1e-12);
        1.0 - 2.0 * m / r
    };
    let sample = SampleBox {
        center: [0.0; 3],
        half_width: opts.box_pad * radius,
        cells: opts.resolution,
    };
    let triangles = polygonize(&value, t * t, &sample);
    if triangles.is_empty() {
        return Err(Error::LevelNotAttained { level: t });
    }
    let components = component_count(&triangles);
    let r_h = model.horizon_radius();
    let samples = triangles
        .iter()
        .map(|tri| {
            let c = tri.centroid();
            let r = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt().max(r_h);
            let u = model.potential(r).unwrap_or(0.0);
            let q_du = model.du_at_radius(r);
            SurfaceSample {
                point: c.to_vec(),
                normal: vec![c[0] / r, c[1] / r, c[2] / r],
                weight: tri.area(),
                du: q_du,
                mean_curvature: 2.0 * u / r,
                h2: 2.0 * (u / r) * (u / r),
                r_surface: 2.0 / (r * r),
            }
        })
        .collect();
    finish_surface(t, samples, 0.0, components, opts)
}

fn triangulation_multicenter(
    field: &MultiCenterField,
    t: f64,
    opts: &ExtractOptions,
) -> Result<LevelSurface> {
    if field.n() != 3 {
        return Err(Error::Config("triangulation backend is 3-D only".into()));
    }
    if t >= 1.0 {
        return Err(Error::LevelNotAttained { level: t });
    }
    let total = field.total_mass();
    let mut center = [0.0f64; 3];
    for (c, m) in field.centers() {
        for d in 0..3 {
            center[d] += m / total * c[d];
        }
    }
    let spread = field
        .centers()
        .iter()
        .map(|(c, _)| {
            ((c[0] - center[0]).powi(2) + (c[1] - center[1]).powi(2) + (c[2] - center[2]).powi(2))
                .sqrt()
        })
        .fold(0.0f64, f64::max);
    let far = total / (1.0 - t);
    let half_width = opts.box_pad * (far + spread).max(1e-3);
    let value = |p: &[f64; 3]| field.value(p);
    let sample = SampleBox {
        center,
        half_width,
        cells: opts.resolution,
    };
    let triangles = polygonize(&value, t, &sample);
    if triangles.is_empty() {
        return Err(Error::LevelNotAttained { level: t });
    }
    let components = component_count(&triangles);
    triangulated_flat_samples(t, &triangles, components, opts, |c| field.evaluate(c))
}

fn triangulation_grid(grid: &GridField, t: f64, opts: &ExtractOptions) -> Result<LevelSurface> {
    // Triangulate on the grid's own lattice, shrunk so derivative stencils
    // stay clear of the Dirichlet nodes.
    let margin = 3.0 * grid.spacing;
    let half = (0..3)
        .map(|d| 0.5 * grid.spacing * (grid.dims[d] - 1) as f64)
        .fold(f64::INFINITY, f64::min)
        - margin;
    if !(half > 0.0) {
        return Err(Error::Config("grid too small for level extraction".into()));
    }
    let center = [
        grid.origin[0] + 0.5 * grid.spacing * (grid.dims[0] - 1) as f64,
        grid.origin[1] + 0.5 * grid.spacing * (grid.dims[1] - 1) as f64,
        grid.origin[2] + 0.5 * grid.spacing * (grid.dims[2] - 1) as f64,
    ];
    let cells = ((2.0 * half) / grid.spacing).floor() as usize;
    let value = |p: &[f64; 3]| grid.value(p);
    let sample = SampleBox {
        center,
        half_width: half,
        cells: cells.max(4),
    };
    let triangles = polygonize(&value, t, &sample);
    if triangles.is_empty() {
        return Err(Error::LevelNotAttained { level: t });
    }
    let components = component_count(&triangles);
    triangulated_flat_samples(t, &triangles, components, opts, |c| grid.evaluate(c))
}

fn triangulated_flat_samples<E>(
    t: f64,
    triangles: &[Triangle],
    components: usize,
    opts: &ExtractOptions,
    evaluate: E,
) -> Result<LevelSurface>
where
    E: Fn(&[f64]) -> Result<Jet2> + Sync,
{
    let jets: Vec<(f64, [f64; 3], Option<Jet2>)> = triangles
        .par_iter()
        .map(|tri| {
            let c = tri.centroid();
            (tri.area(), c, evaluate(&c).ok())
        })
        .collect();
    let max_du = jets
        .iter()
        .filter_map(|(_, _, jet)| jet.as_ref().map(Jet2::du))
        .fold(0.0f64, f64::max);
    let eps = opts.eps_crit_rel * max_du;
    let mut samples = Vec::with_capacity(jets.len());
    let mut excluded = 0.0;
    for (area, c, jet) in jets {
        match jet {
            Some(jet) if jet.du() > eps => {
                let (du, h, h2, r_surface, nu) = flat_sample_geometry(&jet);
                samples.push(SurfaceSample {
                    point: c.to_vec(),
                    normal: nu.as_slice().to_vec(),
                    weight: area,
                    du,
                    mean_curvature: h,
                    h2,
                    r_surface,
                });
            }
            _ => excluded += area,
        }
    }
    finish_surface(t, samples, excluded, components, opts)
}

/// Renormalized p-capacity by quadrature:
/// `U_p(t) = (2m/(1-t^2))^{(p-1)(n-1)/(n-2)} int |Du|^p dsigma`.
pub fn u_p(
    field: &Field,
    config: &StaticConfig,
    t: f64,
    p: f64,
    opts: &ExtractOptions,
) -> Result<f64> {
    let surface = extract(field, t, opts)?;
    u_p_from_surface(&surface, config, p)
}

pub fn u_p_from_surface(surface: &LevelSurface, config: &StaticConfig, p: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(Error::Domain(format!("U_p needs p >= 0, got {p}")));
    }
    Ok(config.prefactor(surface.level, p) * surface.integrate(|s| s.du.powf(p)))
}

/// Raw level-set integral `W_p(t) = int |Du|^p dsigma` (no prefactor); the
/// flat-background analogue of the capacity functional.
pub fn w_p(field: &Field, t: f64, p: f64, opts: &ExtractOptions) -> Result<f64> {
    let surface = extract(field, t, opts)?;
    w_p_from_surface(&surface, p)
}

pub fn w_p_from_surface(surface: &LevelSurface, p: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(Error::Domain(format!("W_p needs p >= 0, got {p}")));
    }
    Ok(surface.integrate(|s| s.du.powf(p)))
}

/// The monotonicity-formula derivative
/// `U_p'(t) = -(p-1) (2m/(1-t^2))^{(p-1)(n-1)/(n-2)}
///            int |Du|^{p-1} [ H - 2 ((n-1)/(n-2)) u |Du| / (1-u^2) ] dsigma`.
/// The integrand is essentially bounded for `p >= 2`, which is the enforced
/// range here.
pub fn up_derivative_formula(
    field: &Field,
    config: &StaticConfig,
    t: f64,
    p: f64,
    opts: &ExtractOptions,
) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::Domain(format!(
            "derivative formula needs p >= 2 (bounded integrand), got {p}"
        )));
    }
    let surface = extract(field, t, opts)?;
    Ok(up_derivative_from_surface(&surface, config, p))
}

/// Same integrand evaluated on an already extracted surface; the sweep uses
/// it for the full admissible range.
pub fn up_derivative_from_surface(surface: &LevelSurface, config: &StaticConfig, p: f64) -> f64 {
    let t = surface.level;
    let nf = config.nf();
    let omt2 = (1.0 - t) * (1.0 + t);
    let drift = 2.0 * (nf - 1.0) / (nf - 2.0) * t / omt2;
    let integral = surface.integrate(|s| {
        s.du.powf(p - 1.0) * (s.mean_curvature - drift * s.du)
    });
    -(p - 1.0) * config.prefactor(t, p) * integral
}

/// Raw harmonic-level-set derivative `W_p'(t) = -(p-1) int |Du|^{p-1} H`,
/// the flat-background form with the drift term absent.
pub fn wp_derivative_from_surface(surface: &LevelSurface, p: f64) -> f64 {
    -(p - 1.0) * surface.integrate(|s| s.du.powf(p - 1.0) * s.mean_curvature)
}

pub fn wp_derivative_formula(field: &Field, t: f64, p: f64, opts: &ExtractOptions) -> Result<f64> {
    let surface = extract(field, t, opts)?;
    Ok(wp_derivative_from_surface(&surface, p))
}

/// Centered finite difference of the quadrature sweep,
/// `(U_p(t+step) - U_p(t-step)) / (2 step)`.
pub fn up_derivative_fd(
    field: &Field,
    config: &StaticConfig,
    t: f64,
    p: f64,
    step: f64,
    opts: &ExtractOptions,
) -> Result<f64> {
    let hi = u_p(field, config, t + step, p, opts)?;
    let lo = u_p(field, config, t - step, p, opts)?;
    Ok((hi - lo) / (2.0 * step))
}

pub fn wp_derivative_fd(
    field: &Field,
    t: f64,
    p: f64,
    step: f64,
    opts: &ExtractOptions,
) -> Result<f64> {
    let hi = w_p(field, t + step, p, opts)?;
    let lo = w_p(field, t - step, p, opts)?;
    Ok((hi - lo) / (2.0 * step))
}

/// Which functional family a sweep tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalKind {
    /// Prefactored capacities `U_p` with conformal `Phi_p` columns.
    Renormalized,
    /// Raw integrals `W_p` (flat harmonic fields).
    Raw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub t_grid: Vec<f64>,
    pub p_values: Vec<f64>,
    pub kind: FunctionalKind,
    /// Critical values of the potential; levels matching one are perturbed
    /// by +1e-9 before extraction and the shift is recorded in the row.
    pub critical_values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub t: f64,
    pub s: f64,
    pub ok: bool,
    pub values: Vec<f64>,
    pub phi_values: Vec<f64>,
    pub d_formula: Vec<f64>,
    pub d_fd: Vec<Option<f64>>,
    pub excluded_area: f64,
    pub perturbation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalTable {
    pub kind: FunctionalKind,
    pub p_values: Vec<f64>,
    pub rows: Vec<TableRow>,
}

/// Exclusion threshold used for rows that collide with a critical value:
/// triangulations within a cell of the saddle are unreliable, so the
/// near-critical neighborhood is dropped at this resolution-scale cutoff
/// and reported through `excluded_area`.
const NEAR_CRITICAL_EPS_REL: f64 = 0.05;

/// Runs the level sweep. Rows are computed in parallel and assembled by
/// grid index; a failed extraction marks its row instead of aborting the
/// sweep. Rows whose level ties with a supplied critical value are
/// perturbed by +1e-9 (recorded in the row) and extracted with the
/// near-critical exclusion threshold. The finite-difference column is
/// filled afterwards from the value columns by interior centered
/// differences (one-sided at the ends).
pub fn sweep(
    field: &Field,
    config: &StaticConfig,
    spec: &SweepSpec,
    opts: &ExtractOptions,
) -> Result<FunctionalTable> {
    if spec.p_values.is_empty() {
        return Err(Error::Config("sweep needs a nonempty p list".into()));
    }
    if spec.t_grid.is_empty() {
        return Err(Error::Config("sweep needs a nonempty t grid".into()));
    }
    if spec.t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("t grid must be strictly increasing".into()));
    }
    if spec
        .t_grid
        .iter()
        .any(|&t| t <= config.u0() || t >= 1.0)
    {
        return Err(Error::Config(format!(
            "t grid must lie strictly inside ({}, 1)",
            config.u0()
        )));
    }

    let mut rows: Vec<TableRow> = spec
        .t_grid
        .par_iter()
        .map(|&t_req| {
            let mut perturbation = 0.0;
            let mut t = t_req;
            let mut row_opts = opts.clone();
            if spec
                .critical_values
                .iter()
                .any(|cv| (t_req - cv).abs() < 1e-12)
            {
                perturbation = 1e-9;
                t = t_req + perturbation;
                row_opts.eps_crit_rel = row_opts.eps_crit_rel.max(NEAR_CRITICAL_EPS_REL);
            }
            let s = conformal::to_phi(t).unwrap_or(f64::INFINITY);
            match extract(field, t, &row_opts) {
                Ok(surface) => {
                    let mut values = Vec::with_capacity(spec.p_values.len());
                    let mut phi_values = Vec::new();
                    let mut d_formula = Vec::with_capacity(spec.p_values.len());
                    for &p in &spec.p_values {
                        match spec.kind {
                            FunctionalKind::Renormalized => {
                                let up = config.prefactor(t, p)
                                    * surface.integrate(|smp| smp.du.powf(p));
                                values.push(up);
                                phi_values.push(conformal::phi_p_from_up(up, p, config));
                                d_formula
                                    .push(up_derivative_from_surface(&surface, config, p));
                            }
                            FunctionalKind::Raw => {
                                values.push(surface.integrate(|smp| smp.du.powf(p)));
                                d_formula.push(wp_derivative_from_surface(&surface, p));
                            }
                        }
                    }
                    TableRow {
                        t: t_req,
                        s,
                        ok: true,
                        values,
                        phi_values,
                        d_formula,
                        d_fd: vec![None; spec.p_values.len()],
                        excluded_area: surface.excluded_area,
                        perturbation,
                    }
                }
                Err(_) => TableRow {
                    t: t_req,
                    s,
                    ok: false,
                    values: Vec::new(),
                    phi_values: Vec::new(),
                    d_formula: Vec::new(),
                    d_fd: Vec::new(),
                    excluded_area: 0.0,
                    perturbation,
                },
            }
        })
        .collect();

    // Finite-difference columns from the tabulated values.
    let count = rows.len();
    for pi in 0..spec.p_values.len() {
        for i in 0..count {
            if !rows[i].ok {
                continue;
            }
            let val = |j: usize| -> Option<(f64, f64)> {
                rows.get(j)
                    .filter(|r| r.ok)
                    .map(|r| (r.t, r.values[pi]))
            };
            let fd = match (i.checked_sub(1).and_then(val), val(i + 1)) {
                (Some((t0, v0)), Some((t1, v1))) => Some((v1 - v0) / (t1 - t0)),
                (None, Some((t1, v1))) => Some((v1 - rows[i].values[pi]) / (t1 - rows[i].t)),
                (Some((t0, v0)), None) => Some((rows[i].values[pi] - v0) / (rows[i].t - t0)),
                (None, None) => None,
            };
            rows[i].d_fd[pi] = fd;
        }
    }

    Ok(FunctionalTable {
        kind: spec.kind,
        p_values: spec.p_values.clone(),
        rows,
    })
}

fn fmt_p(p: f64) -> String {
    if p == p.trunc() && p.abs() < 1e6 {
        format!("{}", p as i64)
    } else {
        format!("{p}")
    }
}

impl FunctionalTable {
    fn prefix(&self) -> &'static str {
        match self.kind {
            FunctionalKind::Renormalized => "U",
            FunctionalKind::Raw => "W",
        }
    }

    /// Column-oriented CSV with one row per level: `t, s`, then per
    /// requested `p` the functional, its conformal twin (renormalized
    /// sweeps), the formula derivative and the finite-difference
    /// derivative, then `excluded_area` and the recorded perturbation.
    /// Failed rows keep their `t, s` cells and leave the rest empty.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["t".to_string(), "s".to_string()];
        let pfx = self.prefix();
        for &p in &self.p_values {
            let ps = fmt_p(p);
            header.push(format!("{pfx}_{ps}"));
            if self.kind == FunctionalKind::Renormalized {
                header.push(format!("Phi_{ps}"));
            }
            header.push(format!("d{pfx}_{ps}_formula"));
            header.push(format!("d{pfx}_{ps}_fd"));
        }
        header.push("excluded_area".to_string());
        header.push("perturbation".to_string());
        let mut out = header.join(",");
        out.push('\n');
        for row in &self.rows {
            let mut cells = vec![format!("{}", row.t), format!("{}", row.s)];
            for pi in 0..self.p_values.len() {
                if row.ok {
                    cells.push(format!("{}", row.values[pi]));
                    if self.kind == FunctionalKind::Renormalized {
                        cells.push(format!("{}", row.phi_values[pi]));
                    }
                    cells.push(format!("{}", row.d_formula[pi]));
                    cells.push(match row.d_fd[pi] {
                        Some(v) => format!("{v}"),
                        None => String::new(),
                    });
                } else {
                    cells.push(String::new());
                    if self.kind == FunctionalKind::Renormalized {
                        cells.push(String::new());
                    }
                    cells.push(String::new());
                    cells.push(String::new());
                }
            }
            if row.ok {
                cells.push(format!("{}", row.excluded_area));
            } else {
                cells.push(String::new());
            }
            cells.push(format!("{}", row.perturbation));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serialization cannot fail")
    }

    /// True when every numeric cell of every successful row is finite.
    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| {
            !r.ok
                || (r.values.iter().all(|v| v.is_finite())
                    && r.phi_values.iter().all(|v| v.is_finite())
                    && r.d_formula.iter().all(|v| v.is_finite())
                    && r.d_fd.iter().flatten().all(|v| v.is_finite())
                    && r.excluded_area.is_finite())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn opts() -> ExtractOptions {
        ExtractOptions::default()
    }

    #[test]
    fn schwarzschild_radial_extraction_is_exact() {
        let model = SchwarzschildModel::new(3, 1.0).unwrap();
        let field = Field::Schwarzschild(model);
        let surf = extract(&field, 0.6, &opts()).unwrap();
        let exact_area = 4.0 * PI * 3.125 * 3.125;
        assert!(((surf.area() - exact_area) / exact_area).abs() < 1e-12);
        for s in &surf.samples {
            assert!((s.mean_curvature - 0.384).abs() < 1e-10);
        }
    }

    #[test]
    fn averaged_norm_of_du_on_the_horizon() {
        // |Du| = m(n-2) r^{1-n} = 1/4 on the n = 3, m = 1 horizon sphere.
        let model = SchwarzschildModel::new(3, 1.0).unwrap();
        let surf = extract(&Field::Schwarzschild(model), 0.0, &opts()).unwrap();
        for &p in &[1.0, 2.0, 5.0] {
            let v = surf.averaged_lp_norm(|s| s.du, p).unwrap();
            assert!((v - 0.25).abs() < 1e-14, "p = {p}: {v}");
        }
    }

    #[test]
    fn monopole_radial_extraction() {
        let field = Field::MultiCenter(MultiCenterField::monopole(3, 1.0).unwrap());
        let surf = extract(&field, 0.5, &opts()).unwrap();
        // Sphere of radius 2 in flat space: H = 2/r = 1.
        assert!(((surf.area() - 16.0 * PI) / (16.0 * PI)).abs() < 1e-12);
        for s in surf.samples.iter().take(5) {
            assert!((s.mean_curvature - 1.0).abs() < 1e-12);
            assert!((s.du - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn monopole_triangulation_matches_round_sphere() {
        let field = Field::MultiCenter(MultiCenterField::monopole(3, 1.0).unwrap());
        let mut o = opts();
        o.backend = Backend::Triangulation;
        o.resolution = 96;
        let surf = extract(&field, 0.5, &o).unwrap();
        assert_eq!(surf.components, 1);
        let area = surf.area();
        assert!(((area - 16.0 * PI) / (16.0 * PI)).abs() < 1e-3, "area {area}");
        // Mean curvature sampled from the smooth field at centroids.
        let h_avg = surf.integrate(|s| s.mean_curvature) / area;
        assert!((h_avg - 1.0).abs() < 1e-3, "H avg {h_avg}");
    }

    #[test]
    fn star_backend_matches_radial_on_monopole() {
        let field = Field::MultiCenter(MultiCenterField::monopole(3, 1.0).unwrap());
        let mut o = opts();
        o.backend = Backend::StarShaped;
        let surf = extract(&field, 0.5, &o).unwrap();
        assert!(((surf.area() - 16.0 * PI) / (16.0 * PI)).abs() < 1e-10);
        let config = field.default_config().unwrap();
        let u1 = u_p_from_surface(&surf, &config, 1.0).unwrap();
        assert!(((u1 - 4.0 * PI) / (4.0 * PI)).abs() < 1e-10);
    }

    #[test]
    fn up_schwarzschild_constancy_radial() {
        let model = SchwarzschildModel::new(3, 1.0).unwrap();
        let config = *model.config();
        let field = Field::Schwarzschild(model);
        for &t in &[0.0, 0.3, 0.6, 0.9] {
            let v = u_p(&field, &config, t, 3.0, &opts()).unwrap();
            assert!(((v - 4.0 * PI) / (4.0 * PI)).abs() < 1e-6, "t={t}: {v}");
        }
        // p = 0 renormalized area.
        let v0 = u_p(&field, &config, 0.45, 0.0, &opts()).unwrap();
        assert!(((v0 - 4.0 * PI) / (4.0 * PI)).abs() < 1e-10);
    }

    #[test]
    fn schwarzschild_derivative_vanishes() {
        for n in [3u32, 4] {
            let model = SchwarzschildModel::new(n, 1.0).unwrap();
            let config = *model.config();
            let field = Field::Schwarzschild(model);
            for &t in &[0.2, 0.5, 0.8] {
                let d = up_derivative_formula(&field, &config, t, 3.0, &opts()).unwrap();
                // Scale against U_p itself.
                let u = u_p(&field, &config, t, 3.0, &opts()).unwrap();
                assert!((d / u).abs() < 1e-8, "n={n} t={t}: {d}");
            }
        }
    }

    #[test]
    fn monopole_raw_derivative_closed_form() {
        // W_3'(0.5) = -8 pi (p-1) m^{p-1} r^{3-2p} = -2 pi at p=3, m=1, r=2.
        let field = Field::MultiCenter(MultiCenterField::monopole(3, 1.0).unwrap());
        let d = wp_derivative_formula(&field, 0.5, 3.0, &opts()).unwrap();
        assert!(((d + 2.0 * PI) / (2.0 * PI)).abs() < 1e-8, "{d}");
        // And the quadrature FD agrees.
        let fd = wp_derivative_fd(&field, 0.5, 3.0, 1e-4, &opts()).unwrap();
        assert!(((fd + 2.0 * PI) / (2.0 * PI)).abs() < 1e-6, "{fd}");
    }

    #[test]
    fn derivative_formula_rejects_low_p() {
        let field = Field::MultiCenter(MultiCenterField::monopole(3, 1.0).unwrap());
        let config = field.default_config().unwrap();
        assert!(up_derivative_formula(&field, &config, 0.5, 1.5, &opts()).is_err());
    }

    #[test]
    fn sweep_schwarzschild_constant_columns() {
        let model = SchwarzschildModel::new(3, 1.0).unwrap();
        let config = *model.config();
        let field = Field::Schwarzschild(model);
        let spec = SweepSpec {
            t_grid: (1..=9).map(|k| k as f64 / 10.0).collect(),
            p_values: vec![1.0, 3.0],
            kind: FunctionalKind::Renormalized,
            critical_values: vec![],
        };
        let table = sweep(&field, &config, &spec, &opts()).unwrap();
        assert!(table.all_finite());
        for row in &table.rows {
            assert!(row.ok);
            for v in &row.values {
                assert!(((v - 4.0 * PI) / (4.0 * PI)).abs() < 1e-8);
            }
            for d in &row.d_formula {
                assert!(d.abs() < 1e-8);
            }
        }
        let csv = table.to_csv();
        assert!(csv.starts_with(
            "t,s,U_1,Phi_1,dU_1_formula,dU_1_fd,U_3,Phi_3,dU_3_formula,dU_3_fd,excluded_area,perturbation"
        ));
    }

    #[test]
    fn sweep_monopole_w1_constant() {
        let field = Field::MultiCenter(MultiCenterField::monopole(3, 1.0).unwrap());
        let config = field.default_config().unwrap();
        let spec = SweepSpec {
            t_grid: (1..=9).map(|k| k as f64 / 10.0).collect(),
            p_values: vec![1.0],
            kind: FunctionalKind::Raw,
            critical_values: vec![],
        };
        let table = sweep(&field, &config, &spec, &opts()).unwrap();
        for row in &table.rows {
            assert!(((row.values[0] - 4.0 * PI) / (4.0 * PI)).abs() < 1e-8);
        }
        assert!(table.to_csv().starts_with("t,s,W_1,dW_1_formula,dW_1_fd"));
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let field = Field::MultiCenter(MultiCenterField::monopole(3, 1.0).unwrap());
        let config = field.default_config().unwrap();
        let mut spec = SweepSpec {
            t_grid: vec![0.5, 0.4],
            p_values: vec![1.0],
            kind: FunctionalKind::Raw,
            critical_values: vec![],
        };
        assert!(sweep(&field, &config, &spec, &opts()).is_err());
        spec.t_grid = vec![];
        assert!(sweep(&field, &config, &spec, &opts()).is_err());
        spec.t_grid = vec![0.5];
        spec.p_values = vec![];
        assert!(sweep(&field, &config, &spec, &opts()).is_err());
    }

    #[test]
    fn sweep_restricts_grid_to_above_u0() {
        // Nonzero Dirichlet values are handled by restricting the level
        // grid, not by a different model.
        let model = SchwarzschildModel::new(3, 1.0).unwrap();
        let config = StaticConfig::new(3, 1.0, 0.3).unwrap();
        let field = Field::Schwarzschild(model);
        let mut spec = SweepSpec {
            t_grid: vec![0.2, 0.5],
            p_values: vec![3.0],
            kind: FunctionalKind::Renormalized,
            critical_values: vec![],
        };
        assert!(sweep(&field, &config, &spec, &opts()).is_err());
        spec.t_grid = vec![0.4, 0.5];
        assert!(sweep(&field, &config, &spec, &opts()).is_ok());
    }

    #[test]
    fn level_not_attained_is_reported() {
        let field = Field::MultiCenter(MultiCenterField::monopole(3, 1.0).unwrap());
        assert!(matches!(
            extract(&field, 1.5, &opts()),
            Err(Error::LevelNotAttained { .. })
        ));
    }
}
