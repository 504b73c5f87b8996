//! The cylindrical ansatz: conversions between the original data `(g0, u)`
//! and the conformal data `(g, phi)` with `g = (1-u^2)^{2/(n-2)} g0` and
//! `phi = log((1+u)/(1-u))`, plus the dictionary between the level-set
//! functionals on both sides.
//!
//! Near `u = 1` the quantity `1 - u^2` underflows when computed naively, so
//! every conversion has a `*_from` variant taking `1 - u^2` directly (on a
//! Schwarzschild background the caller knows it as `2m r^{2-n}`).

use crate::config::StaticConfig;
use crate::error::{Error, Result};
use crate::schwarzschild::SchwarzschildModel;
use crate::sphere::gauss_legendre;

/// `phi = log((1+u)/(1-u))`. Rejects `|u| >= 1`.
pub fn to_phi(u: f64) -> Result<f64> {
    if !(u.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "conformal variable needs |u| < 1, got u = {u}"
        )));
    }
    // ln_1p-based form keeps full precision near u = 0.
    Ok((u).ln_1p() - (-u).ln_1p())
}

/// Inverse change of variable, `u = tanh(phi/2)`.
pub fn from_phi(phi: f64) -> f64 {
    (phi / 2.0).tanh()
}

/// `|nabla phi|_g = 2 |Du| / (1-u^2)^{(n-1)/(n-2)}`.
pub fn gradient_norm_g(du: f64, u: f64, n: u32) -> f64 {
    gradient_norm_g_from(du, 1.0 - u * u, n)
}

/// Same, with `1 - u^2` supplied by the caller.
pub fn gradient_norm_g_from(du: f64, one_minus_u2: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    2.0 * du / one_minus_u2.powf((nf - 1.0) / (nf - 2.0))
}

/// Mean curvature of a level set in the conformal ambient:
/// `H_g = (1-u^2)^{-1/(n-2)} [ H - ((n-1)/(n-2)) 2 u |Du| / (1-u^2) ]`.
pub fn mean_curvature_g(h: f64, u: f64, du: f64, n: u32) -> f64 {
    mean_curvature_g_from(h, u, du, 1.0 - u * u, n)
}

/// Same, with `1 - u^2` supplied by the caller.
pub fn mean_curvature_g_from(h: f64, u: f64, du: f64, one_minus_u2: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    let drift = (nf - 1.0) / (nf - 2.0) * 2.0 * u * du / one_minus_u2;
    one_minus_u2.powf(-1.0 / (nf - 2.0)) * (h - drift)
}

/// Inverse conversion,
/// `H = cosh(phi/2)^{-2/(n-2)} [ H_g + ((n-1)/(n-2)) tanh(phi/2) |nabla phi|_g ]`.
pub fn mean_curvature_from_g(h_g: f64, phi: f64, grad_phi_g: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    let half = phi / 2.0;
    let drift = (nf - 1.0) / (nf - 2.0) * half.tanh() * grad_phi_g;
    half.cosh().powf(-2.0 / (nf - 2.0)) * (h_g + drift)
}

/// Squared Hessian norm of `phi` in the conformal metric:
///
/// `|nabla^2 phi|_g^2 = 4 |D^2 u|^2 / (1-u^2)^{2n/(n-2)}
///   + (16 n / (n-2)) u D^2u(Du, Du) / (1-u^2)^{(3n-2)/(n-2)}
///   + (16 n (n-1) / (n-2)^2) u^2 |Du|^4 / (1-u^2)^{(4n-4)/(n-2)}`.
pub fn hessian_norm_g_sq(
    u: f64,
    du: f64,
    hess_sq: f64,
    hess_du_du: f64,
    one_minus_u2: f64,
    n: u32,
) -> f64 {
    let nf = f64::from(n);
    let d = nf - 2.0;
    let t1 = 4.0 * hess_sq / one_minus_u2.powf(2.0 * nf / d);
    let t2 = 16.0 * nf / d * u * hess_du_du / one_minus_u2.powf((3.0 * nf - 2.0) / d);
    let t3 = 16.0 * nf * (nf - 1.0) / (d * d) * u * u * du.powi(4)
        / one_minus_u2.powf((4.0 * nf - 4.0) / d);
    t1 + t2 + t3
}

/// Scalar curvature of the conformal metric from the traced quasi-Einstein
/// equation: `R_g = (n-1) |nabla phi|_g^2 / (n-2)`.
pub fn scalar_curvature_g(grad_phi_g: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    (nf - 1.0) * grad_phi_g * grad_phi_g / (nf - 2.0)
}

/// Pointwise data of a potential together with its conformal counterparts.
#[derive(Debug, Clone, Copy)]
pub struct ConformalPointData {
    pub u: f64,
    pub du: f64,
    pub hess_nn: f64,
    pub hess_sq: f64,
    pub hess_du_du: f64,
    pub phi: f64,
    pub grad_phi_g: f64,
    pub hess_phi_g_sq: f64,
}

impl ConformalPointData {
    /// Builds the record from original-side data. `one_minus_u2` may carry a
    /// cancellation-free value of `1 - u^2`; if `None` it is computed
    /// directly.
    pub fn new(
        u: f64,
        du: f64,
        hess_nn: f64,
        hess_sq: f64,
        one_minus_u2: Option<f64>,
        n: u32,
    ) -> Result<Self> {
        let omu2 = one_minus_u2.unwrap_or(1.0 - u * u);
        if !(omu2 > 0.0) {
            return Err(Error::Domain(format!(
                "conformal point data needs 1 - u^2 > 0, got {omu2}"
            )));
        }
        let hess_du_du = hess_nn * du * du;
        Ok(Self {
            u,
            du,
            hess_nn,
            hess_sq,
            hess_du_du,
            phi: to_phi(u)?,
            grad_phi_g: gradient_norm_g_from(du, omu2, n),
            hess_phi_g_sq: hessian_norm_g_sq(u, du, hess_sq, hess_du_du, omu2, n),
        })
    }
}

/// `U_p = (2m)^{(p-1)(n-1)/(n-2)} / 2^p * Phi_p(s)`, inverted.
pub fn phi_p_from_up(up: f64, p: f64, config: &StaticConfig) -> f64 {
    up / up_phi_factor(p, config)
}

/// Forward conversion `Phi_p -> U_p`.
pub fn up_from_phi_p(phi_p: f64, p: f64, config: &StaticConfig) -> f64 {
    phi_p * up_phi_factor(p, config)
}

fn up_phi_factor(p: f64, config: &StaticConfig) -> f64 {
    (2.0 * config.mass()).powf(config.prefactor_exponent(p)) / 2f64.powf(p)
}

/// Derivative dictionary:
/// `U_p'(t) = (2m)^{(p-1)(n-1)/(n-2)} / (2^{p-1} (1-t^2)) * Phi_p'(s)` with
/// `s = log((1+t)/(1-t))`.
pub fn up_derivative_from_phi(phi_p_d: f64, t: f64, p: f64, config: &StaticConfig) -> f64 {
    phi_p_d * up_phi_derivative_factor(t, p, config)
}

/// Inverse of [`up_derivative_from_phi`].
pub fn phi_p_derivative_from_up(up_d: f64, t: f64, p: f64, config: &StaticConfig) -> f64 {
    up_d / up_phi_derivative_factor(t, p, config)
}

fn up_phi_derivative_factor(t: f64, p: f64, config: &StaticConfig) -> f64 {
    (2.0 * config.mass()).powf(config.prefactor_exponent(p))
        / (2f64.powf(p - 1.0) * (1.0 - t * t))
}

/// Second-derivative dictionary:
/// `U_p''(t) = (2m)^{(p-1)(n-1)/(n-2)} / (2^{p-2} (1-t^2)^2)
///             * ( t Phi_p'(s) + Phi_p''(s) )`.
pub fn up_second_derivative_from_phi(
    phi_p_d: f64,
    phi_p_dd: f64,
    t: f64,
    p: f64,
    config: &StaticConfig,
) -> f64 {
    let omt2 = 1.0 - t * t;
    (2.0 * config.mass()).powf(config.prefactor_exponent(p)) / (2f64.powf(p - 2.0) * omt2 * omt2)
        * (t * phi_p_d + phi_p_dd)
}

/// Inverse of [`up_second_derivative_from_phi`] for `Phi_p''`.
pub fn phi_p_second_derivative_from_up(
    up_d: f64,
    up_dd: f64,
    t: f64,
    p: f64,
    config: &StaticConfig,
) -> f64 {
    let omt2 = 1.0 - t * t;
    let factor =
        (2.0 * config.mass()).powf(config.prefactor_exponent(p)) / (2f64.powf(p - 2.0) * omt2 * omt2);
    up_dd / factor - from_phi_slope(up_d, t, p, config)
}

fn from_phi_slope(up_d: f64, t: f64, p: f64, config: &StaticConfig) -> f64 {
    t * phi_p_derivative_from_up(up_d, t, p, config)
}

/// Checks the first integral identity of the divergence structure on the
/// Schwarzschild cylinder, where `nabla^2 phi` vanishes identically:
///
/// `int_{phi=s} |nabla phi|^p / sinh(s) dsigma_g
///  = int_{phi>s} coth(phi) |nabla phi|^{p+1} / sinh(phi) dmu_g`.
///
/// The bulk side is evaluated by coarea (`dmu_g = dsigma_g dphi / |nabla
/// phi|_g` with constant cross-section) and Gauss-Legendre quadrature after
/// the substitution `x = e^{-phi}`, which maps the semi-infinite integral to
/// `(0, e^{-s}]`. Returns the relative residual `|LHS - RHS| / |LHS|`.
pub fn cylinder_identity_check(
    model: &SchwarzschildModel,
    s: f64,
    p: f64,
    nodes: usize,
) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!(
            "cylinder identity needs s > 0, got {s}"
        )));
    }
    if !(p >= 1.0) {
        return Err(Error::Domain(format!(
            "cylinder identity needs p >= 1, got {p}"
        )));
    }
    let exact = model.conformal_exact(p)?;
    let c_p = exact.phi_gradient_norm.powf(p);
    let area = exact.cross_section_area_g;
    let lhs = c_p * area / s.sinh();

    // RHS = c^p A * int_s^inf coth(phi)/sinh(phi) dphi; after x = e^{-phi}
    // the integrand becomes 2 (1 + x^2) / (1 - x^2)^2 on (0, e^{-s}].
    let x0 = (-s).exp();
    let integral = |order: usize| -> f64 {
        let (xs, ws) = gauss_legendre(order);
        xs.iter()
            .zip(&ws)
            .map(|(xi, wi)| {
                let x = 0.5 * x0 * (xi + 1.0);
                let jac = 0.5 * x0;
                wi * jac * 2.0 * (1.0 + x * x) / ((1.0 - x * x) * (1.0 - x * x))
            })
            .sum()
    };
    let coarse = integral(nodes / 2);
    let fine = integral(nodes);
    if ((fine - coarse) / fine).abs() > 1e-11 {
        return Err(Error::Quadrature(format!(
            "semi-infinite phi-integral did not settle: {coarse} vs {fine}"
        )));
    }
    let rhs = c_p * area * fine;
    Ok(((lhs - rhs) / lhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n3_config() -> StaticConfig {
        StaticConfig::new(3, 1.0, 0.0).unwrap()
    }

    #[test]
    fn phi_round_trip_and_values() {
        assert_eq!(to_phi(0.0).unwrap(), 0.0);
        assert!((to_phi(0.6).unwrap() - 4.0_f64.ln()).abs() < 1e-15);
        assert!((to_phi(1.0_f64.tanh()).unwrap() - 2.0).abs() < 1e-14);
        for k in -99..=99 {
            let u = k as f64 / 100.0;
            let back = from_phi(to_phi(u).unwrap());
            assert!((back - u).abs() <= 1e-14, "round trip off at u = {u}");
        }
        assert!(to_phi(1.0).is_err());
        assert!(to_phi(-1.0).is_err());
    }

    #[test]
    fn gradient_norm_examples() {
        // Horizon values of the n = 3, m = 1 model.
        assert!((gradient_norm_g(0.25, 0.0, 3) - 0.5).abs() < 1e-15);
        assert_eq!(gradient_norm_g(0.0, 0.3, 3), 0.0);
    }

    #[test]
    fn mean_curvature_g_monopole_point() {
        // Flat monopole values treated formally: H = 1, u = 0.5, |Du| = 0.25.
        // The bracket is 1 - 2 * (2 * 0.5 * 0.25 / 0.75) = 1/3, so
        // H_g = (0.75)^{-1} / 3 = 4/9.
        let hg = mean_curvature_g(1.0, 0.5, 0.25, 3);
        assert!((hg - 4.0 / 9.0).abs() < 1e-14, "H_g = {hg}");
    }

    #[test]
    fn mean_curvature_round_trip() {
        let (h, u, du, n) = (0.73, 0.41, 0.19, 4);
        let hg = mean_curvature_g(h, u, du, n);
        let phi = to_phi(u).unwrap();
        let grad_phi = gradient_norm_g(du, u, n);
        let back = mean_curvature_from_g(hg, phi, grad_phi, n);
        assert!((back - h).abs() < 1e-12);
    }

    #[test]
    fn mean_curvature_at_u_zero_is_conformally_invariant() {
        let h = 0.37;
        assert!((mean_curvature_g(h, 0.0, 0.25, 3) - h).abs() < 1e-15);
    }

    #[test]
    fn hessian_norm_reduces_at_u_zero() {
        let v = hessian_norm_g_sq(0.0, 0.3, 1.7, 0.01, 1.0, 3);
        assert!((v - 4.0 * 1.7).abs() < 1e-14);
    }

    #[test]
    fn scalar_curvature_values() {
        assert!((scalar_curvature_g(0.5, 3) - 0.5).abs() < 1e-15);
        assert_eq!(scalar_curvature_g(0.0, 5), 0.0);
        assert!((scalar_curvature_g(1.0, 4) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn up_phi_dictionary_n3() {
        let config = n3_config();
        // Conversion factor 2^4 / 2^3 = 2 at p = 3: Phi_3 = 2 pi <-> U_3 = 4 pi.
        let phi3 = 2.0 * std::f64::consts::PI;
        let u3 = up_from_phi_p(phi3, 3.0, &config);
        assert!((u3 - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((phi_p_from_up(u3, 3.0, &config) - phi3).abs() < 1e-12);

        // p = 1: factor (2m)^0 / 2 = 1/2.
        let u1 = 4.0 * std::f64::consts::PI;
        let phi1 = phi_p_from_up(u1, 1.0, &config);
        assert!((phi1 - 8.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn conformal_point_data_derivations() {
        // Horizon-type data of the n = 3, m = 1 model: u = 0, |Du| = 1/4.
        let data = ConformalPointData::new(0.0, 0.25, -0.125, 0.09375, None, 3).unwrap();
        assert_eq!(data.phi, 0.0);
        assert!((data.grad_phi_g - 0.5).abs() < 1e-15);
        assert!((data.hess_du_du - (-0.125 * 0.0625)).abs() < 1e-15);
        // At u = 0 the odd terms drop: |nabla^2 phi|^2 = 4 |D^2 u|^2.
        assert!((data.hess_phi_g_sq - 4.0 * 0.09375).abs() < 1e-14);
        assert!(ConformalPointData::new(1.0, 0.1, 0.0, 0.0, None, 3).is_err());
    }

    #[test]
    fn cylinder_identity_domain_guards() {
        let model = SchwarzschildModel::new(3, 1.0).unwrap();
        assert!(cylinder_identity_check(&model, 0.0, 3.0, 128).is_err());
        assert!(cylinder_identity_check(&model, -1.0, 3.0, 128).is_err());
        assert!(cylinder_identity_check(&model, 1.0, 0.5, 128).is_err());
        assert!(cylinder_identity_check(&model, 1.0, 3.0, 128).unwrap() < 1e-10);
    }

    #[test]
    fn cylinder_identity_reports_unsettled_quadrature() {
        // Two nodes cannot resolve the integrand; the order-halving check
        // must flag it instead of returning a garbage residual.
        let model = SchwarzschildModel::new(3, 1.0).unwrap();
        assert!(matches!(
            cylinder_identity_check(&model, 0.5, 3.0, 2),
            Err(crate::error::Error::Quadrature(_))
        ));
    }

    #[test]
    fn derivative_dictionary_round_trips() {
        let config = StaticConfig::new(4, 0.7, 0.0).unwrap();
        let (t, p) = (0.45, 3.0);
        let up_d = -0.123;
        let phi_d = phi_p_derivative_from_up(up_d, t, p, &config);
        let back = up_derivative_from_phi(phi_d, t, p, &config);
        assert!(((back - up_d) / up_d).abs() < 1e-12);
        // Zero derivative maps to zero derivative: positive factor.
        assert_eq!(phi_p_derivative_from_up(0.0, t, p, &config), 0.0);

        let up_dd = 0.77;
        let phi_dd = phi_p_second_derivative_from_up(up_d, up_dd, t, p, &config);
        let back_dd = up_second_derivative_from_phi(phi_d, phi_dd, t, p, &config);
        assert!(((back_dd - up_dd) / up_dd).abs() < 1e-12);
    }
}
