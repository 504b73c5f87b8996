//! Config-driven orchestration: parse a run description, execute the sweep
//! and inequality evaluation, and persist tables, reports and a manifest.
//! Outputs are deterministic for a fixed config: fixed quadrature nodes,
//! fixed iteration orders, tables assembled by row index.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::StaticConfig;
use crate::conformal;
use crate::error::{Error, Result};
use crate::grid::{solve_dirichlet, Excision, GridSpec, OuterData};
use crate::harmonic::{critical_points, MultiCenterField, SearchBox};
use crate::inequalities::{
    reports_to_json, reports_to_text, Evaluator, InequalityReport, LpExponent, Provenance,
    Tolerances, WillmoreMode,
};
use crate::levelset::{
    extract, sweep, Backend, ExtractOptions, Field, FunctionalKind, SweepSpec,
};
use crate::schwarzschild::SchwarzschildModel;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "STATPOT_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Schwarzschild,
    Monopole,
    Multicenter,
    GridSolve,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: Mode,
    pub n: u32,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub centers: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSpacing {
    Linear,
    TanhUniform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsSection {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
    #[serde(default = "default_spacing")]
    pub spacing: GridSpacing,
}

fn default_spacing() -> GridSpacing {
    GridSpacing::Linear
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalsSection {
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    #[serde(default = "default_backend")]
    pub backend: Backend,
    #[serde(default = "default_polar")]
    pub polar: usize,
    #[serde(default = "default_azimuth")]
    pub azimuth: usize,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_backend() -> Backend {
    Backend::Auto
}
fn default_polar() -> usize {
    64
}
fn default_azimuth() -> usize {
    128
}
fn default_resolution() -> usize {
    128
}

impl Default for QuadratureSection {
    fn default() -> Self {
        Self {
            backend: Backend::Auto,
            polar: 64,
            azimuth: 128,
            resolution: 128,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_rigidity_tol")]
    pub rigidity_tol: f64,
    #[serde(default = "default_eps_crit")]
    pub eps_crit_rel: f64,
}

fn default_tol() -> f64 {
    1e-6
}
fn default_rigidity_tol() -> f64 {
    1e-8
}
fn default_eps_crit() -> f64 {
    1e-6
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            rigidity_tol: default_rigidity_tol(),
            eps_crit_rel: default_eps_crit(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub h: f64,
    pub half_width: f64,
    pub excision_radius: f64,
    #[serde(default)]
    pub excision_value: f64,
    #[serde(default = "default_grid_tol")]
    pub tolerance: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    /// Also solve at 2h and record the measured convergence order.
    #[serde(default = "default_true")]
    pub measure_order: bool,
}

fn default_grid_tol() -> f64 {
    1e-10
}
fn default_max_sweeps() -> usize {
    100_000
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    pub suite: String,
    #[serde(default = "default_rhs_scale")]
    pub rhs_scale: f64,
    #[serde(default)]
    pub tol: Option<f64>,
}

fn default_rhs_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub levels: Option<LevelsSection>,
    #[serde(default)]
    pub functionals: Option<FunctionalsSection>,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub check: Option<CheckSection>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }
}

/// Builds the level grid: uniform in `t`, or uniform in the conformal
/// coordinate `s = log((1+t)/(1-t))` to resolve the near-`t = 1` regime.
pub fn build_t_grid(levels: &LevelsSection) -> Result<Vec<f64>> {
    if levels.count < 1 || !(levels.t_min < levels.t_max) {
        return Err(Error::Config("bad level grid specification".into()));
    }
    let k = levels.count;
    if k == 1 {
        return Ok(vec![levels.t_min]);
    }
    let grid = match levels.spacing {
        GridSpacing::Linear => (0..k)
            .map(|i| {
                levels.t_min + (levels.t_max - levels.t_min) * i as f64 / (k - 1) as f64
            })
            .collect(),
        GridSpacing::TanhUniform => {
            let s0 = conformal::to_phi(levels.t_min)?;
            let s1 = conformal::to_phi(levels.t_max)?;
            (0..k)
                .map(|i| {
                    let s = s0 + (s1 - s0) * i as f64 / (k - 1) as f64;
                    conformal::from_phi(s)
                })
                .collect()
        }
    };
    Ok(grid)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub artifacts: Vec<String>,
    pub check_failures: usize,
}

fn resolve_out_dir(config: &RunConfig) -> PathBuf {
    if let Some(dir) = &config.run.out_dir {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from(".")
}

fn build_field(config: &RunConfig) -> Result<(Field, StaticConfig)> {
    let n = config.run.n;
    match config.run.mode {
        Mode::Schwarzschild => {
            let m = config.field.m.ok_or_else(|| {
                Error::Config("schwarzschild mode needs field.m".into())
            })?;
            let model = SchwarzschildModel::new(n, m)?;
            let cfg = *model.config();
            Ok((Field::Schwarzschild(model), cfg))
        }
        Mode::Monopole => {
            let m = config
                .field
                .m
                .ok_or_else(|| Error::Config("monopole mode needs field.m".into()))?;
            let f = MultiCenterField::monopole(n, m)?;
            let cfg = StaticConfig::new(n, m, 0.0)?;
            Ok((Field::MultiCenter(f), cfg))
        }
        Mode::Multicenter => {
            let centers = config.field.centers.clone().ok_or_else(|| {
                Error::Config("multicenter mode needs field.centers".into())
            })?;
            let weights = config.field.weights.clone().ok_or_else(|| {
                Error::Config("multicenter mode needs field.weights".into())
            })?;
            if centers.len() != weights.len() {
                return Err(Error::Config(
                    "field.centers and field.weights must have equal length".into(),
                ));
            }
            let f = MultiCenterField::new(
                n,
                centers.into_iter().zip(weights).collect(),
            )?;
            let cfg = StaticConfig::new(n, f.total_mass(), 0.0)?;
            Ok((Field::MultiCenter(f), cfg))
        }
        Mode::GridSolve => Err(Error::Config(
            "grid-solve mode is handled by the grid pipeline".into(),
        )),
    }
}

fn extract_options(config: &RunConfig, mode_default: Backend) -> ExtractOptions {
    let backend = if config.quadrature.backend == Backend::Auto {
        mode_default
    } else {
        config.quadrature.backend
    };
    ExtractOptions {
        backend,
        polar_order: config.quadrature.polar,
        azimuth_order: config.quadrature.azimuth,
        resolution: config.quadrature.resolution,
        eps_crit_rel: config.tolerances.eps_crit_rel,
        ..Default::default()
    }
}

/// Executes a run config, writing every requested artifact into the output
/// directory. Returns the artifact list and the number of failed
/// config-requested checks.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let out_dir = resolve_out_dir(config);
    fs::create_dir_all(&out_dir)?;
    let started = Instant::now();
    let mut artifacts: Vec<String> = Vec::new();
    let mut manifest = serde_json::Map::new();
    manifest.insert(
        "config".into(),
        serde_json::to_value(config).map_err(|e| Error::Parse(e.to_string()))?,
    );
    manifest.insert(
        "version".into(),
        serde_json::Value::String(env!("CARGO_PKG_VERSION").to_string()),
    );

    let wants = |fmt: &str| config.run.formats.iter().any(|f| f == fmt);

    match config.run.mode {
        Mode::GridSolve => {
            run_grid_mode(config, &out_dir, &mut artifacts, &mut manifest, wants("csv"))?;
        }
        _ => {
            run_field_mode(config, &out_dir, &mut artifacts, &mut manifest, &wants)?;
        }
    }

    // Config-requested acceptance checks.
    let mut check_failures = 0usize;
    if let Some(check) = &config.check {
        let outcome = run_check_suite(&check.suite, check.rhs_scale, check.tol)?;
        check_failures = outcome.lines.iter().filter(|l| !l.pass).count();
        manifest.insert(
            "check".into(),
            serde_json::to_value(&outcome).map_err(|e| Error::Parse(e.to_string()))?,
        );
    }

    manifest.insert(
        "timings_ms".into(),
        serde_json::json!({ "total": started.elapsed().as_millis() as u64 }),
    );
    let manifest_path = out_dir.join("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&serde_json::Value::Object(manifest))
            .map_err(|e| Error::Parse(e.to_string()))?,
    )?;
    artifacts.push("manifest.json".into());

    Ok(RunSummary {
        out_dir,
        artifacts,
        check_failures,
    })
}

fn run_field_mode(
    config: &RunConfig,
    out_dir: &Path,
    artifacts: &mut Vec<String>,
    manifest: &mut serde_json::Map<String, serde_json::Value>,
    wants: &dyn Fn(&str) -> bool,
) -> Result<()> {
    let (field, static_config) = build_field(config)?;
    let mode_default = match (&config.run.mode, &field) {
        (Mode::Schwarzschild, _) | (Mode::Monopole, _) => Backend::RadialExact,
        (Mode::Multicenter, _) => Backend::Triangulation,
        _ => Backend::Auto,
    };
    let opts = extract_options(config, mode_default);

    // Critical values feed the sweep's tie-breaking.
    let mut critical_values = Vec::new();
    if let Field::MultiCenter(mc) = &field {
        if !mc.is_monopole() && mc.n() == 3 {
            let spread = mc
                .centers()
                .iter()
                .map(|(c, _)| c.norm())
                .fold(0.0f64, f64::max)
                .max(1.0);
            let search = SearchBox {
                lo: vec![-2.0 * spread; 3],
                hi: vec![2.0 * spread; 3],
                seeds_per_axis: 7,
            };
            for point in critical_points(mc, &search)? {
                critical_values.push(mc.value(&point));
            }
        }
    }

    let levels = config.levels.clone().unwrap_or(LevelsSection {
        t_min: 0.05,
        t_max: 0.95,
        count: 19,
        spacing: GridSpacing::Linear,
    });
    let t_grid = build_t_grid(&levels)?;
    let p_values = config
        .functionals
        .clone()
        .map(|f| f.p)
        .unwrap_or_else(|| vec![1.0, 3.0]);
    let kind = match config.run.mode {
        Mode::Schwarzschild => FunctionalKind::Renormalized,
        _ => FunctionalKind::Raw,
    };
    let spec = SweepSpec {
        t_grid,
        p_values: p_values.clone(),
        kind,
        critical_values,
    };
    let table = sweep(&field, &static_config, &spec, &opts)?;
    if !table.all_finite() {
        return Err(Error::Quadrature(
            "non-finite value in the functional table".into(),
        ));
    }
    if wants("csv") {
        fs::write(out_dir.join("table.csv"), table.to_csv())?;
        artifacts.push("table.csv".into());
    }
    if wants("json") {
        fs::write(out_dir.join("table.json"), table.to_json())?;
        artifacts.push("table.json".into());
    }

    // Self-convergence measurement for the manifest: repeat the middle
    // level at half resolution.
    let mid_t = spec.t_grid[spec.t_grid.len() / 2];
    let p_ref = p_values[0];
    let fine = extract(&field, mid_t, &opts)?;
    let mut coarse_opts = opts.clone();
    coarse_opts.polar_order = (opts.polar_order / 2).max(4);
    coarse_opts.azimuth_order = (opts.azimuth_order / 2).max(8);
    coarse_opts.resolution = (opts.resolution / 2).max(8);
    let coarse = extract(&field, mid_t, &coarse_opts)?;
    let f_fine = fine.integrate(|s| s.du.powf(p_ref));
    let f_coarse = coarse.integrate(|s| s.du.powf(p_ref));
    manifest.insert(
        "self_convergence".into(),
        serde_json::json!({
            "t": mid_t,
            "p": p_ref,
            "fine": f_fine,
            "coarse": f_coarse,
            "relative_change": ((f_fine - f_coarse) / f_fine).abs(),
        }),
    );

    // Inequality reports at a representative interior level, plus the
    // boundary set where the field has a geodesic boundary (Schwarzschild).
    let provenance = match config.run.mode {
        Mode::Schwarzschild => Provenance::StaticSolution,
        _ => Provenance::FormalField,
    };
    let evaluator = Evaluator::new(static_config)
        .with_tolerances(Tolerances {
            tol: config.tolerances.tol,
            rigidity_tol: config.tolerances.rigidity_tol,
        })
        .with_provenance(provenance);
    let p_ineq = p_values.iter().cloned().fold(f64::NAN, f64::max).max(3.0);
    let mut reports: Vec<InequalityReport> = Vec::new();
    let interior = extract(&field, mid_t, &opts)?;
    match config.run.mode {
        Mode::Schwarzschild => {
            reports.push(evaluator.integral_inequality(&interior, p_ineq)?);
            reports.push(evaluator.lp_bounds(&interior, LpExponent::Finite(p_ineq))?);
            reports.push(evaluator.lp_bounds(&interior, LpExponent::Infinity)?);
            let ms = evaluator.mass_sandwich(&interior, p_ineq)?;
            reports.extend(ms.reports);
            let (oi, ob) = evaluator.overdetermined_residuals(&interior)?;
            reports.push(oi);
            reports.push(ob);
            let boundary = extract(&field, 0.0, &opts)?;
            reports.extend(evaluator.penrose_and_sufficient_conditions(&boundary, p_ineq)?);
            if static_config.n() >= 4 {
                reports.push(evaluator.willmore(&interior, WillmoreMode::Static)?);
                reports.push(evaluator.willmore(&boundary, WillmoreMode::Boundary)?);
                reports.push(evaluator.yamabe_comparison(&boundary)?);
            } else {
                reports.extend(evaluator.black_hole_uniqueness_chain(&boundary)?);
            }
        }
        _ => {
            reports.push(evaluator.willmore(&interior, WillmoreMode::Flat)?);
            let (oi, ob) = evaluator.overdetermined_residuals(&interior)?;
            reports.push(oi);
            reports.push(ob);
        }
    }
    if reports
        .iter()
        .any(|r| !(r.lhs.is_finite() && r.rhs.is_finite()))
    {
        return Err(Error::Quadrature("non-finite value in a report".into()));
    }
    if wants("json") {
        fs::write(out_dir.join("reports.json"), reports_to_json(&reports))?;
        artifacts.push("reports.json".into());
    }
    fs::write(out_dir.join("reports.txt"), reports_to_text(&reports))?;
    artifacts.push("reports.txt".into());
    Ok(())
}

fn run_grid_mode(
    config: &RunConfig,
    out_dir: &Path,
    artifacts: &mut Vec<String>,
    manifest: &mut serde_json::Map<String, serde_json::Value>,
    want_csv: bool,
) -> Result<()> {
    let grid = config
        .grid
        .as_ref()
        .ok_or_else(|| Error::Config("grid-solve mode needs a [grid] section".into()))?;
    let m = config.field.m.unwrap_or(1.0);
    let make_spec = |h: f64| GridSpec {
        tolerance: grid.tolerance,
        max_sweeps: grid.max_sweeps,
        ..GridSpec::cube(
            grid.half_width,
            h,
            vec![Excision {
                center: [0.0; 3],
                radius: grid.excision_radius,
                value: grid.excision_value,
            }],
            OuterData::Monopole { m },
        )
    };
    let field = solve_dirichlet(&make_spec(grid.h))?;
    let reference = |p: &[f64; 3]| 1.0 - m / (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();

    let mut grid_info = serde_json::Map::new();
    grid_info.insert("sweeps".into(), serde_json::json!(field.report.sweeps));
    grid_info.insert("residual".into(), serde_json::json!(field.report.residual));
    let (lo, hi) = field.interior_range();
    let (blo, bhi) = field.boundary_range();
    grid_info.insert(
        "max_principle".into(),
        serde_json::json!(lo > blo && hi < bhi),
    );
    let flux = field.dual_shell_flux(1)?;
    grid_info.insert("flux".into(), serde_json::json!(flux));
    grid_info.insert("max_error".into(), serde_json::json!(field.max_error_vs(reference)));

    if grid.measure_order {
        let coarse = solve_dirichlet(&make_spec(2.0 * grid.h))?;
        let e_coarse = coarse.max_error_vs(reference);
        let e_fine = field.max_error_vs(reference);
        grid_info.insert(
            "convergence_order".into(),
            serde_json::json!((e_coarse / e_fine).log2()),
        );
    }
    manifest.insert("grid".into(), serde_json::Value::Object(grid_info));

    let mut bin = Vec::new();
    field.write_binary(&mut bin)?;
    fs::write(out_dir.join("field.bin"), bin)?;
    artifacts.push("field.bin".into());
    if want_csv {
        let mut csv = Vec::new();
        field.write_csv(&mut csv)?;
        fs::write(out_dir.join("field.csv"), csv)?;
        artifacts.push("field.csv".into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Check suites
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub suite: String,
    pub lines: Vec<CheckLine>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("suite: {}\n", self.suite);
        for l in &self.lines {
            out.push_str(&format!(
                "  [{}] {} - {}\n",
                if l.pass { "pass" } else { "FAIL" },
                l.name,
                l.detail
            ));
        }
        out
    }
}

/// Deterministic 64-bit mixer for reproducible sample points.
struct SplitMix64(u64);

impl SplitMix64 {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let x = self.next_u64() as f64 / u64::MAX as f64;
        lo + (hi - lo) * x
    }
}

/// Runs a named check suite. `rhs_scale` deliberately rescales the
/// right-hand sides of the comparisons (a negative control when != 1);
/// `tol_override` replaces each check's default tolerance.
pub fn run_check_suite(
    suite: &str,
    rhs_scale: f64,
    tol_override: Option<f64>,
) -> Result<CheckOutcome> {
    let mut lines = Vec::new();
    match suite {
        "schwarzschild-rigidity" => {
            suite_schwarzschild_rigidity(&mut lines, rhs_scale, tol_override)?
        }
        "kato" => suite_kato(&mut lines, rhs_scale, tol_override)?,
        "monopole-flux" => suite_monopole_flux(&mut lines, rhs_scale, tol_override)?,
        "cylinder-identity" => suite_cylinder_identity(&mut lines, rhs_scale, tol_override)?,
        "conformal" => suite_conformal(&mut lines, rhs_scale, tol_override)?,
        "willmore" => suite_willmore(&mut lines, rhs_scale, tol_override)?,
        "all" => {
            suite_schwarzschild_rigidity(&mut lines, rhs_scale, tol_override)?;
            suite_kato(&mut lines, rhs_scale, tol_override)?;
            suite_monopole_flux(&mut lines, rhs_scale, tol_override)?;
            suite_cylinder_identity(&mut lines, rhs_scale, tol_override)?;
            suite_conformal(&mut lines, rhs_scale, tol_override)?;
            suite_willmore(&mut lines, rhs_scale, tol_override)?;
        }
        other => {
            return Err(Error::Config(format!(
                "unknown check suite '{other}' (known: schwarzschild-rigidity, kato, monopole-flux, cylinder-identity, conformal, willmore, all)"
            )))
        }
    }
    Ok(CheckOutcome {
        suite: suite.to_string(),
        lines,
    })
}

fn push_check(lines: &mut Vec<CheckLine>, name: &str, err: f64, tol: f64) {
    lines.push(CheckLine {
        name: name.to_string(),
        pass: err <= tol,
        detail: format!("error {err:.3e}, tolerance {tol:.1e}"),
    });
}

fn suite_schwarzschild_rigidity(
    lines: &mut Vec<CheckLine>,
    rhs_scale: f64,
    tol_override: Option<f64>,
) -> Result<()> {
    let tol = tol_override.unwrap_or(1e-8);
    for n in [3u32, 4] {
        let model = SchwarzschildModel::new(n, 1.0)?;
        let config = *model.config();
        let field = Field::Schwarzschild(model);
        let opts = ExtractOptions::default();
        let mut worst_const: f64 = 0.0;
        let mut worst_deriv: f64 = 0.0;
        for k in 1..=9 {
            let t = k as f64 / 10.0;
            let surface = extract(&field, t, &opts)?;
            for p in [1.0, 3.0] {
                let up = config.prefactor(t, p) * surface.integrate(|s| s.du.powf(p));
                let exact = model.up_exact(t, p)? * rhs_scale;
                worst_const = worst_const.max(((up - exact) / exact).abs());
            }
            let d = crate::levelset::up_derivative_from_surface(&surface, &config, 3.0);
            let u = config.prefactor(t, 3.0) * surface.integrate(|s| s.du.powf(3.0));
            worst_deriv = worst_deriv.max((d / u).abs());
        }
        push_check(lines, &format!("u_p-constancy-n{n}"), worst_const, tol);
        push_check(lines, &format!("u_p-derivative-zero-n{n}"), worst_deriv, tol);

        let surface = extract(&field, 0.6, &ExtractOptions::default())?;
        let evaluator = Evaluator::new(config);
        let ms = evaluator.mass_sandwich(&surface, 3.0)?;
        let err = ((ms.lower - ms.mass).abs() + (ms.upper - ms.mass).abs()) / ms.mass;
        push_check(lines, &format!("mass-sandwich-collapse-n{n}"), err, tol);

        let (oi, ob) = evaluator.overdetermined_residuals(&surface)?;
        push_check(lines, &format!("overdetermined-interior-n{n}"), oi.lhs, tol);
        let boundary = extract(&field, 0.0, &ExtractOptions::default())?;
        let (_, ob0) = evaluator.overdetermined_residuals(&boundary)?;
        push_check(lines, &format!("overdetermined-boundary-n{n}"), ob0.lhs, tol);
        let _ = ob;

        // Conformal mean curvature vanishes on the cylinder.
        let q = model.level_quantities(0.6)?;
        let hg = conformal::mean_curvature_g_from(
            q.mean_curvature,
            0.6,
            q.du,
            model.one_minus_u2(q.radius),
            n,
        );
        push_check(lines, &format!("conformal-minimal-n{n}"), hg.abs(), tol);
    }
    Ok(())
}

fn kato_deficit(jet: &crate::harmonic::Jet2, n: u32) -> f64 {
    let du = jet.du();
    let nu = &jet.gradient / du;
    let grad_du = &jet.hessian * &nu;
    let hess_sq: f64 = jet.hessian.iter().map(|v| v * v).sum();
    hess_sq - f64::from(n) / (f64::from(n) - 1.0) * grad_du.norm_squared()
}

fn suite_kato(
    lines: &mut Vec<CheckLine>,
    rhs_scale: f64,
    tol_override: Option<f64>,
) -> Result<()> {
    let tol = tol_override.unwrap_or(1e-10) * rhs_scale;
    let monopole = MultiCenterField::monopole(3, 1.0)?;
    let two = MultiCenterField::new(
        3,
        vec![(vec![0.5, 0.0, 0.0], 0.5), (vec![-0.5, 0.0, 0.0], 0.5)],
    )?;
    for (name, field) in [("monopole", &monopole), ("two-center", &two)] {
        let mut rng = SplitMix64(suite_seed(name));
        let mut worst: f64 = 0.0;
        let mut taken = 0usize;
        while taken < 10_000 {
            let x = [
                rng.uniform(-3.0, 3.0),
                rng.uniform(-3.0, 3.0),
                rng.uniform(-3.0, 3.0),
            ];
            let near_center = field
                .centers()
                .iter()
                .any(|(c, _)| (c[0] - x[0]).powi(2) + (c[1] - x[1]).powi(2) + (c[2] - x[2]).powi(2) < 0.01);
            if near_center {
                continue;
            }
            let jet = field.evaluate(&x)?;
            if jet.du() < 1e-8 {
                continue;
            }
            worst = worst.min(kato_deficit(&jet, 3));
            taken += 1;
        }
        push_check(lines, &format!("refined-kato-{name}"), (-worst).max(0.0), tol);
    }
    Ok(())
}

fn suite_monopole_flux(
    lines: &mut Vec<CheckLine>,
    rhs_scale: f64,
    tol_override: Option<f64>,
) -> Result<()> {
    let tol = tol_override.unwrap_or(1e-8);
    let field = Field::MultiCenter(MultiCenterField::monopole(3, 1.0)?);
    let exact = 4.0 * std::f64::consts::PI * rhs_scale;
    let mut worst: f64 = 0.0;
    for k in 1..=9 {
        let t = k as f64 / 10.0;
        let w1 = crate::levelset::w_p(&field, t, 1.0, &ExtractOptions::default())?;
        worst = worst.max(((w1 - exact) / exact).abs());
    }
    push_check(lines, "monopole-w1-constancy", worst, tol);
    Ok(())
}

fn suite_cylinder_identity(
    lines: &mut Vec<CheckLine>,
    rhs_scale: f64,
    tol_override: Option<f64>,
) -> Result<()> {
    let tol = tol_override.unwrap_or(1e-8) * rhs_scale;
    let model = SchwarzschildModel::new(3, 1.0)?;
    let mut worst: f64 = 0.0;
    for p in [1.0, 3.0] {
        for s in [0.5, 1.0, 2.0] {
            worst = worst.max(conformal::cylinder_identity_check(&model, s, p, 128)?);
        }
    }
    push_check(lines, "cylinder-first-identity", worst, tol);
    Ok(())
}

fn suite_conformal(
    lines: &mut Vec<CheckLine>,
    rhs_scale: f64,
    tol_override: Option<f64>,
) -> Result<()> {
    let tol = tol_override.unwrap_or(1e-12);
    let mut worst: f64 = 0.0;
    for k in -99i32..=99 {
        let u = f64::from(k) / 100.0;
        worst = worst.max((conformal::from_phi(conformal::to_phi(u)?) - u).abs());
    }
    push_check(lines, "phi-round-trip", worst, tol.max(1e-14));

    let model = SchwarzschildModel::new(3, 1.0)?;
    let config = *model.config();
    let mut worst_phi: f64 = 0.0;
    for p in [0.0, 1.0, 3.0, 4.0] {
        let exact = model.conformal_exact(p)?.phi_p_value * rhs_scale;
        let from_up = conformal::phi_p_from_up(model.up_exact(0.5, p)?, p, &config);
        worst_phi = worst_phi.max(((from_up - exact) / exact).abs());
    }
    push_check(lines, "phi-p-limit-values", worst_phi, tol.max(1e-12));
    Ok(())
}

fn suite_willmore(
    lines: &mut Vec<CheckLine>,
    rhs_scale: f64,
    tol_override: Option<f64>,
) -> Result<()> {
    let tol = tol_override.unwrap_or(1e-8);
    // Equality on Schwarzschild n = 4.
    let model = SchwarzschildModel::new(4, 1.0)?;
    let config = *model.config();
    let field = Field::Schwarzschild(model);
    let surface = extract(&field, 0.5, &ExtractOptions::default())?;
    let rep = Evaluator::new(config).willmore(&surface, WillmoreMode::Static)?;
    push_check(
        lines,
        "willmore-static-equality-n4",
        (rep.slack / rep.rhs).abs(),
        tol / rhs_scale,
    );
    // Flat equality on the round monopole sphere.
    let mono = Field::MultiCenter(MultiCenterField::monopole(3, 1.0)?);
    let cfg3 = mono.default_config()?;
    let sphere = extract(&mono, 0.5, &ExtractOptions::default())?;
    let rep2 = Evaluator::new(cfg3)
        .with_provenance(Provenance::FormalField)
        .willmore(&sphere, WillmoreMode::Flat)?;
    push_check(
        lines,
        "willmore-flat-sphere-equality",
        (rep2.slack / rep2.rhs).abs(),
        tol / rhs_scale,
    );
    Ok(())
}

fn suite_seed(name: &str) -> u64 {
    name.bytes().fold(0xcbf29ce484222325u64, |acc, b| {
        (acc ^ u64::from(b)).wrapping_mul(0x100000001b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys() {
        let text = r#"
[run]
mode = "schwarzschild"
n = 3
surprise = 1
"#;
        assert!(RunConfig::from_toml(text).is_err());
    }

    #[test]
    fn tanh_uniform_grid_is_uniform_in_s() {
        let grid = build_t_grid(&LevelsSection {
            t_min: 0.1,
            t_max: 0.9,
            count: 5,
            spacing: GridSpacing::TanhUniform,
        })
        .unwrap();
        let s: Vec<f64> = grid
            .iter()
            .map(|&t| conformal::to_phi(t).unwrap())
            .collect();
        let d0 = s[1] - s[0];
        for w in s.windows(2) {
            assert!(((w[1] - w[0]) - d0).abs() < 1e-12);
        }
    }

    #[test]
    fn check_suite_negative_control_fails() {
        let ok = run_check_suite("monopole-flux", 1.0, None).unwrap();
        assert!(ok.passed());
        let bad = run_check_suite("monopole-flux", 0.5, None).unwrap();
        assert!(!bad.passed());
    }

    #[test]
    fn unknown_suite_is_a_config_error() {
        assert!(matches!(
            run_check_suite("no-such-suite", 1.0, None),
            Err(Error::Config(_))
        ));
    }
}
