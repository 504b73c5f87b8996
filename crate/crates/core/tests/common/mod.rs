//! Shared test oracles, kept independent of the library's extraction
//! backends: surface integrals over axisymmetric two-center level sets are
//! reduced to a 1-D profile quadrature in the polar angle, with the area
//! element from implicit differentiation of the level equation.

#![allow(dead_code)]

use statpot::harmonic::MultiCenterField;
use statpot::sphere::gauss_legendre;

/// Equal-weight two-center field on the x-axis with the given separation
/// and total mass 1.
pub fn two_center(separation: f64) -> MultiCenterField {
    let d = separation / 2.0;
    MultiCenterField::new(
        3,
        vec![(vec![d, 0.0, 0.0], 0.5), (vec![-d, 0.0, 0.0], 0.5)],
    )
    .unwrap()
}

/// Unequal two-center field used by the saddle-location tests.
pub fn two_center_unequal() -> MultiCenterField {
    MultiCenterField::new(
        3,
        vec![(vec![-1.0, 0.0, 0.0], 1.0), (vec![1.0, 0.0, 0.0], 0.25)],
    )
    .unwrap()
}

fn rho_of_theta(field: &MultiCenterField, t: f64, theta: f64) -> f64 {
    let dir = [theta.cos(), theta.sin(), 0.0];
    let at = |rho: f64| field.value(&[rho * dir[0], rho * dir[1], rho * dir[2]]);
    let mut hi = 1.0 / (1.0 - t);
    let mut grow = 0;
    while at(hi) < t {
        hi *= 2.0;
        grow += 1;
        assert!(grow < 80, "level not attained along theta = {theta}");
    }
    let mut lo = 1e-9;
    assert!(at(lo) < t, "origin not inside the level set");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// High-order surface integral `int_Sigma f dsigma` over the level set
/// `{u = t}` of an axisymmetric field (centers on the x-axis, origin
/// star-shaped), using the surface-of-revolution element
/// `dsigma = 2 pi rho sin(theta) sqrt(rho^2 + rho'^2) dtheta`.
///
/// `f` receives the evaluation point.
pub fn axisymmetric_integral<F: Fn(&[f64; 3]) -> f64>(
    field: &MultiCenterField,
    t: f64,
    nodes: usize,
    f: F,
) -> f64 {
    let (xs, ws) = gauss_legendre(nodes);
    let mut acc = 0.0;
    for (x, w) in xs.iter().zip(&ws) {
        let theta = 0.5 * std::f64::consts::PI * (x + 1.0);
        let jac = 0.5 * std::f64::consts::PI;
        let rho = rho_of_theta(field, t, theta);
        let (st, ct) = theta.sin_cos();
        let point = [rho * ct, rho * st, 0.0];
        let jet = field.evaluate(&point).unwrap();
        // rho'(theta) = -rho (grad u . omega_theta) / (grad u . omega)
        let omega = [ct, st, 0.0];
        let omega_theta = [-st, ct, 0.0];
        let du_omega: f64 = (0..3).map(|i| jet.gradient[i] * omega[i]).sum();
        let du_omega_theta: f64 = (0..3).map(|i| jet.gradient[i] * omega_theta[i]).sum();
        let rho_prime = -rho * du_omega_theta / du_omega;
        let ds = (rho * rho + rho_prime * rho_prime).sqrt();
        acc += w * jac * f(&point) * 2.0 * std::f64::consts::PI * rho * st * ds;
    }
    acc
}

/// `|Du|` at a point of the field, for oracle integrands.
pub fn du_at(field: &MultiCenterField, p: &[f64; 3]) -> f64 {
    field.evaluate(p).unwrap().du()
}

/// Mean curvature of the level set through `p` (flat background,
/// `H = (lap u - D^2u(nu,nu))/|Du|`).
pub fn mean_curvature_at(field: &MultiCenterField, p: &[f64; 3]) -> f64 {
    let jet = field.evaluate(p).unwrap();
    let (_, h, _, _, _) = statpot::levelset::flat_sample_geometry(&jet);
    h
}
