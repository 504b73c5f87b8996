//! Unit-sphere areas and product quadrature rules on `S^{n-1}`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Hypersurface area of the unit sphere `S^{n-1}` in `R^n`,
/// `2 pi^{n/2} / Gamma(n/2)`.
///
/// `Gamma(n/2)` is evaluated through the half-integer closed forms, so the
/// result is exact to rounding for every integer dimension.
pub fn unit_sphere_area(n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "unit sphere area needs ambient dimension n >= 2, got {n}"
        )));
    }
    Ok(2.0 * PI.powf(f64::from(n) / 2.0) / gamma_half_integer(n))
}

/// `Gamma(n/2)` for integer `n >= 1` by the recursion `Gamma(x+1) = x Gamma(x)`
/// seeded with `Gamma(1/2) = sqrt(pi)` and `Gamma(1) = 1`.
fn gamma_half_integer(n: u32) -> f64 {
    let even = n.is_multiple_of(2);
    let mut value = if even { 1.0 } else { PI.sqrt() };
    let mut two_x = if even { 2u32 } else { 1u32 };
    while two_x < n {
        value *= f64::from(two_x) / 2.0;
        two_x += 2;
    }
    value
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre polynomial from the Chebyshev initial guess.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Initial guess (Abramowitz & Stegun 22.16.6).
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature rule on the unit sphere `S^{n-1}`: unit directions with
/// positive weights summing to `|S^{n-1}|`.
///
/// Built recursively from the product form `x = (cos t, sin t * y)` with
/// `y in S^{n-2}`: Gauss-Legendre in each polar angle (the `sin^k t` factor
/// goes into the weight) and a uniform trapezoid rule on the final azimuth.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: u32,
    pub directions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(n: u32, polar_order: usize, azimuth_order: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!(
                "sphere rule needs ambient dimension n >= 2, got {n}"
            )));
        }
        if polar_order == 0 || azimuth_order == 0 {
            return Err(Error::Config(
                "sphere rule orders must be positive".into(),
            ));
        }
        let (directions, weights) = build_rule(n, polar_order, azimuth_order);
        Ok(Self {
            dim: n,
            directions,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Sum of all weights; equals `|S^{n-1}|` up to quadrature rounding.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn build_rule(n: u32, polar_order: usize, azimuth_order: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    if n == 2 {
        // Uniform rule on the circle; exact for trigonometric polynomials.
        let m = azimuth_order;
        let w = 2.0 * PI / m as f64;
        let mut dirs = Vec::with_capacity(m);
        for k in 0..m {
            let t = 2.0 * PI * k as f64 / m as f64;
            dirs.push(vec![t.cos(), t.sin()]);
        }
        return (dirs, vec![w; m]);
    }
    let (sub_dirs, sub_weights) = build_rule(n - 1, polar_order, azimuth_order);
    let (gl_nodes, gl_weights) = gauss_legendre(polar_order);
    let sin_power = i32::try_from(n - 2).expect("dimension fits i32");
    let mut dirs = Vec::with_capacity(polar_order * sub_dirs.len());
    let mut weights = Vec::with_capacity(polar_order * sub_dirs.len());
    for (x, wx) in gl_nodes.iter().zip(&gl_weights) {
        // Map [-1, 1] -> [0, pi].
        let theta = 0.5 * PI * (x + 1.0);
        let jac = 0.5 * PI;
        let (st, ct) = theta.sin_cos();
        let w_theta = wx * jac * st.powi(sin_power);
        for (y, wy) in sub_dirs.iter().zip(&sub_weights) {
            let mut dir = Vec::with_capacity(n as usize);
            dir.push(ct);
            dir.extend(y.iter().map(|c| st * c));
            dirs.push(dir);
            weights.push(w_theta * wy);
        }
    }
    (dirs, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_area_known_values() {
        // 4 pi.
        assert!((unit_sphere_area(3).unwrap() - 12.566370614359172).abs() < 1e-12);
        // Unit circle length.
        assert!((unit_sphere_area(2).unwrap() - 2.0 * PI).abs() < 1e-12);
        // 2 pi^2, from an independent evaluation of 2 pi^{n/2} / Gamma(n/2)
        // with Gamma(2) = 1.
        assert!((unit_sphere_area(4).unwrap() - 19.739208802178716).abs() < 1e-12);
    }

    #[test]
    fn sphere_area_rejects_low_dimension() {
        assert!(unit_sphere_area(1).is_err());
        assert!(unit_sphere_area(0).is_err());
    }

    #[test]
    fn sphere_area_recursion() {
        // A(n) = 2 pi A(n-2) / (n-2).
        for n in 4..=12 {
            let a = unit_sphere_area(n).unwrap();
            let prev = unit_sphere_area(n - 2).unwrap();
            let rhs = 2.0 * PI * prev / f64::from(n - 2);
            assert!(
                ((a - rhs) / rhs).abs() < 1e-13,
                "recursion fails at n = {n}"
            );
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        // degree 15 is exact for an 8-point rule
        let integral: f64 = x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| wi * (xi.powi(14) + 3.0 * xi.powi(5)))
            .sum();
        let exact = 2.0 / 15.0;
        assert!((integral - exact).abs() < 1e-14);
    }

    #[test]
    fn sphere_rule_weights_sum_to_area() {
        for n in 2..=5 {
            let rule = SphereRule::new(n, 24, 48).unwrap();
            let area = unit_sphere_area(n).unwrap();
            assert!(
                ((rule.total_weight() - area) / area).abs() < 1e-12,
                "weight sum off at n = {n}"
            );
            for d in &rule.directions {
                let norm: f64 = d.iter().map(|c| c * c).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_rule_integrates_coordinate_squares() {
        // int_{S^{n-1}} x_i^2 = |S^{n-1}|/n for each i.
        let n = 4;
        let rule = SphereRule::new(n, 24, 48).unwrap();
        let area = unit_sphere_area(n).unwrap();
        for i in 0..n as usize {
            let v: f64 = rule
                .directions
                .iter()
                .zip(&rule.weights)
                .map(|(d, w)| w * d[i] * d[i])
                .sum();
            assert!((v - area / f64::from(n)).abs() < 1e-10);
        }
    }
}
