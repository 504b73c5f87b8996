//! Cross-validation of the level-set engine against independent oracles:
//! the axisymmetric profile quadrature for two-center surfaces, closed
//! forms for the monopole, and finite differences for the derivative
//! formulas.

mod common;

use statpot::levelset::{
    extract, sweep, u_p, up_derivative_fd, up_derivative_formula, Backend, ExtractOptions,
    Field, FunctionalKind, SweepSpec,
};
use statpot::{MultiCenterField, StaticConfig};

fn star_opts() -> ExtractOptions {
    ExtractOptions {
        backend: Backend::StarShaped,
        ..Default::default()
    }
}

#[test]
fn averaged_l2_norm_matches_axisymmetric_oracle() {
    // Two-center field, p = 2: the engine's star-shaped quadrature against
    // the independent profile quadrature, within 1e-6 relative.
    let field = common::two_center(1.0);
    let t = 0.5;
    let surface = extract(&Field::MultiCenter(field.clone()), t, &star_opts()).unwrap();
    let engine = surface.averaged_lp_norm(|s| s.du, 2.0).unwrap();

    let area = common::axisymmetric_integral(&field, t, 800, |_| 1.0);
    let second = common::axisymmetric_integral(&field, t, 800, |p| {
        common::du_at(&field, p).powi(2)
    });
    let oracle = (second / area).sqrt();
    assert!(
        ((engine - oracle) / oracle).abs() < 1e-6,
        "engine {engine} vs oracle {oracle}"
    );
}

#[test]
fn k_factor_two_center_matches_oracle() {
    let field = common::two_center(1.0);
    let t = 0.5;
    let p = 3.0;
    let surface = extract(&Field::MultiCenter(field.clone()), t, &star_opts()).unwrap();
    let engine = surface.k_factor(3, p).unwrap();
    assert!(engine > 0.0 && engine <= 1.0, "K = {engine}");

    let area = common::axisymmetric_integral(&field, t, 800, |_| 1.0);
    let l1 = common::axisymmetric_integral(&field, t, 800, |q| common::du_at(&field, q)) / area;
    let lp = (common::axisymmetric_integral(&field, t, 800, |q| {
        common::du_at(&field, q).powi(3)
    }) / area)
        .powf(1.0 / p);
    let oracle = (l1 / lp).powf(p * 1.0 / ((p - 1.0) * 2.0));
    assert!(
        ((engine - oracle) / oracle).abs() < 1e-8,
        "engine {engine} vs oracle {oracle}"
    );
    // Jensen forces K < 1 strictly on this non-constant surface.
    assert!(engine < 1.0 - 1e-6);
}

#[test]
fn up_derivative_two_center_formula_vs_fd() {
    let field = Field::MultiCenter(common::two_center(1.0));
    let config = StaticConfig::new(3, 1.0, 0.0).unwrap();
    let (t, p) = (0.5, 3.0);
    let formula = up_derivative_formula(&field, &config, t, p, &star_opts()).unwrap();
    let fd = up_derivative_fd(&field, &config, t, p, 1e-3, &star_opts()).unwrap();
    assert!(
        ((formula - fd) / fd).abs() < 1e-3,
        "formula {formula} vs fd {fd}"
    );
}

#[test]
fn conformal_derivative_dictionary_is_coherent_on_generic_fields() {
    // phi = log((1+u)/(1-u)) is harmonic for the conformally rescaled
    // metric whenever u is flat-harmonic, so the conformal-side surface
    // formula Phi_p'(s) = -(p-1) int |grad phi|_g^{p-1} H_g dsigma_g must
    // reproduce the u-side derivative through the dictionary, sample by
    // sample, on a genuinely non-symmetric field.
    use statpot::conformal;
    let field = Field::MultiCenter(common::two_center(1.0));
    let config = StaticConfig::new(3, 1.0, 0.0).unwrap();
    let (t, p) = (0.5, 3.0);
    let surface = extract(&field, t, &star_opts()).unwrap();

    // u-side: the quadrature formula, converted through the dictionary.
    let up_d = statpot::levelset::up_derivative_from_surface(&surface, &config, p);
    let phi_d_via_dictionary = conformal::phi_p_derivative_from_up(up_d, t, p, &config);

    // g-side: every factor from the pointwise conversions.
    let n = 3u32;
    let omu2 = 1.0 - t * t;
    let area_factor = omu2.powf((config.nf() - 1.0) / (config.nf() - 2.0));
    let phi_d_direct = -(p - 1.0)
        * surface.integrate(|s| {
            let grad_g = conformal::gradient_norm_g_from(s.du, omu2, n);
            let h_g = conformal::mean_curvature_g_from(s.mean_curvature, t, s.du, omu2, n);
            grad_g.powf(p - 1.0) * h_g * area_factor
        });
    assert!(
        ((phi_d_via_dictionary - phi_d_direct) / phi_d_direct).abs() < 1e-10,
        "dictionary {phi_d_via_dictionary} vs direct {phi_d_direct}"
    );
}

#[test]
fn u1_flux_constant_on_two_center_field() {
    // Divergence theorem: U_1 = W_1 = (n-2) (sum m_i) |S^{n-1}| on every
    // enclosing level set, non-spherical ones included.
    let field = Field::MultiCenter(common::two_center(1.0));
    let config = StaticConfig::new(3, 1.0, 0.0).unwrap();
    let exact = 4.0 * std::f64::consts::PI;
    for &t in &[0.2, 0.5, 0.8] {
        let u1 = u_p(&field, &config, t, 1.0, &star_opts()).unwrap();
        assert!(
            ((u1 - exact) / exact).abs() < 1e-9,
            "t = {t}: U_1 = {u1}"
        );
    }
}

#[test]
fn component_count_across_the_saddle() {
    // Equal centers at (+-2, 0, 0): the saddle sits at the origin with
    // value 0.5. Just above: one connected surface; just below: two.
    let field = common::two_center(4.0);
    let saddle = field.value(&[0.0, 0.0, 0.0]);
    assert!((saddle - 0.5).abs() < 1e-12);

    let opts = ExtractOptions {
        backend: Backend::Triangulation,
        resolution: 96,
        ..Default::default()
    };
    let above = extract(&Field::MultiCenter(field.clone()), 0.54, &opts).unwrap();
    assert_eq!(above.components, 1, "above the saddle");
    let below = extract(&Field::MultiCenter(field.clone()), 0.46, &opts).unwrap();
    assert_eq!(below.components, 2, "below the saddle");
}

#[test]
fn sweep_across_saddle_flags_near_critical_rows() {
    let field = common::two_center(4.0);
    let saddle = field.value(&[0.0, 0.0, 0.0]);
    let spec = SweepSpec {
        t_grid: vec![0.3, 0.4, saddle, 0.6, 0.7],
        p_values: vec![3.0],
        kind: FunctionalKind::Raw,
        critical_values: vec![saddle],
    };
    let config = StaticConfig::new(3, 1.0, 0.0).unwrap();
    let opts = ExtractOptions {
        backend: Backend::Triangulation,
        resolution: 96,
        ..Default::default()
    };
    let table = sweep(&Field::MultiCenter(field), &config, &spec, &opts).unwrap();
    let saddle_row = &table.rows[2];
    assert!(saddle_row.perturbation > 0.0, "tie-break not recorded");
    // The near-critical row reports a nonzero excluded neighborhood.
    assert!(
        saddle_row.excluded_area > 0.0,
        "no excluded area near the critical value: {saddle_row:?}"
    );
    // Away from the saddle the sweep is clean.
    assert!(table.rows[0].ok && table.rows[4].ok);
    assert!(table.rows[0].excluded_area == 0.0);
}

#[test]
fn sweep_marks_failed_rows_without_aborting() {
    // Below the saddle value 0.5 the surface is not star-shaped around the
    // centroid, so the star backend fails there; the sweep must mark that
    // row and still deliver the others.
    let field = Field::MultiCenter(common::two_center(4.0));
    let config = StaticConfig::new(3, 1.0, 0.0).unwrap();
    let spec = SweepSpec {
        t_grid: vec![0.4, 0.7],
        p_values: vec![3.0],
        kind: FunctionalKind::Raw,
        critical_values: vec![],
    };
    let opts = ExtractOptions {
        backend: Backend::StarShaped,
        ..Default::default()
    };
    let table = sweep(&field, &config, &spec, &opts).unwrap();
    assert!(!table.rows[0].ok, "below-saddle star row should fail");
    assert!(table.rows[1].ok, "above-saddle row should succeed");
    assert!(table.all_finite());
    // CSV keeps the failed row with empty numeric cells.
    let csv = table.to_csv();
    let failed_line = csv.lines().nth(1).unwrap();
    assert!(failed_line.starts_with("0.4,"));
    assert!(failed_line.contains(",,"));
}

#[test]
fn excluded_fraction_above_limit_is_degenerate() {
    // An absurd exclusion threshold drops most of the surface; the
    // extraction must refuse rather than return a hollow sample set.
    let field = Field::MultiCenter(common::two_center(1.0));
    let opts = ExtractOptions {
        backend: Backend::Triangulation,
        resolution: 48,
        eps_crit_rel: 0.999,
        max_excluded_frac: 0.1,
        ..Default::default()
    };
    assert!(matches!(
        extract(&field, 0.5, &opts),
        Err(statpot::Error::DegenerateSurface(_))
    ));
}

#[test]
fn triangulation_self_convergence() {
    // Doubling the resolution moves W_3 by less than the declared
    // tolerance of the coarser run.
    let field = Field::MultiCenter(common::two_center(1.0));
    let t = 0.5;
    let coarse = {
        let opts = ExtractOptions {
            backend: Backend::Triangulation,
            resolution: 64,
            ..Default::default()
        };
        extract(&field, t, &opts)
            .unwrap()
            .integrate(|s| s.du.powi(3))
    };
    let fine = {
        let opts = ExtractOptions {
            backend: Backend::Triangulation,
            resolution: 128,
            ..Default::default()
        };
        extract(&field, t, &opts)
            .unwrap()
            .integrate(|s| s.du.powi(3))
    };
    assert!(
        ((fine - coarse) / fine).abs() < 1e-3,
        "coarse {coarse} vs fine {fine}"
    );
}

#[test]
fn refined_kato_on_extracted_samples() {
    // |D^2 u|^2 >= n/(n-1) |grad |Du||^2 at every regular sample.
    let field = common::two_center(1.0);
    let surface = extract(&Field::MultiCenter(field.clone()), 0.4, &star_opts()).unwrap();
    for s in surface.samples.iter().step_by(7) {
        let jet = field.evaluate(&s.point).unwrap();
        let du = jet.du();
        let nu = &jet.gradient / du;
        let grad_du = &jet.hessian * &nu;
        let hess_sq: f64 = jet.hessian.iter().map(|v| v * v).sum();
        let deficit = hess_sq - 1.5 * grad_du.norm_squared();
        assert!(deficit >= -1e-10, "Kato deficit {deficit} at {:?}", s.point);
    }
}

#[test]
fn flat_mean_curvature_formula_consistency() {
    // -D^2u(Du,Du)/|Du|^3 equals the general expression when the analytic
    // Laplacian vanishes.
    let field = common::two_center_unequal();
    for &p in &[
        [2.0, 0.3, -0.1],
        [0.4, 1.2, 0.8],
        [-2.5, 0.4, 0.0],
        [1.9, -1.1, 2.2],
    ] {
        let jet = field.evaluate(&p).unwrap();
        let (du, h, _, _, _) = statpot::levelset::flat_sample_geometry(&jet);
        let nu = &jet.gradient / du;
        let direct = -nu.dot(&(&jet.hessian * &nu)) / du;
        assert!(
            (h - direct).abs() <= 1e-10 * (1.0 + h.abs()),
            "H = {h} vs {direct} at {p:?}"
        );
    }
}

#[test]
fn bounded_derivative_integrand_near_critical_level() {
    // For p >= 2 the integrand |Du|^{p-1} H stays bounded on levels
    // approaching the saddle: its max must not grow when the resolution is
    // refined.
    let field = Field::MultiCenter(common::two_center(4.0));
    let t = 0.5004; // just above the saddle value 0.5
    let max_at = |resolution: usize| -> f64 {
        let opts = ExtractOptions {
            backend: Backend::Triangulation,
            resolution,
            ..Default::default()
        };
        let surface = extract(&field, t, &opts).unwrap();
        surface
            .samples
            .iter()
            .map(|s| (s.du.powf(2.0) * s.mean_curvature).abs())
            .fold(0.0f64, f64::max)
    };
    let coarse = max_at(64);
    let fine = max_at(128);
    assert!(
        fine < 2.0 * coarse.max(1e-3),
        "integrand max grows with resolution: {coarse} -> {fine}"
    );
}

#[test]
fn grid_field_levelset_matches_monopole_geometry() {
    // Solve the exterior problem, then extract a level set of the solved
    // field and compare its geometry with the analytic monopole sphere.
    use statpot::grid::{solve_dirichlet, Excision, GridSpec, OuterData};
    let spec = GridSpec::cube(
        1.5,
        1.0 / 24.0,
        vec![Excision {
            center: [0.0; 3],
            radius: 1.0,
            value: 0.0,
        }],
        OuterData::Monopole { m: 1.0 },
    );
    let grid = solve_dirichlet(&spec).unwrap();
    let field = Field::Grid(grid);
    let t = 0.2; // sphere of radius 1/(1-t) = 1.25
    let surface = extract(&field, t, &ExtractOptions::default()).unwrap();
    let r = 1.25;
    let area = surface.area();
    let exact_area = 4.0 * std::f64::consts::PI * r * r;
    assert!(
        ((area - exact_area) / exact_area).abs() < 1e-3,
        "area {area} vs {exact_area}"
    );
    let h_mean = surface.integrate(|s| s.mean_curvature) / area;
    assert!(
        (h_mean - 2.0 / r).abs() < 2e-2,
        "H mean {h_mean} vs {}",
        2.0 / r
    );
    let field_mc = MultiCenterField::monopole(3, 1.0).unwrap();
    let du_mean = surface.integrate(|s| s.du) / area;
    let exact_du = common::du_at(&field_mc, &[r, 0.0, 0.0]);
    assert!(
        ((du_mean - exact_du) / exact_du).abs() < 1e-3,
        "du {du_mean} vs {exact_du}"
    );
}
