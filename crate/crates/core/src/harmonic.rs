//! Closed-form harmonic potentials on the flat background:
//! `u(x) = 1 - sum_i m_i |x - x_i|^{2-n}` with analytic first and second
//! derivatives, and a Newton search for critical points of the gradient.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Value, gradient and Hessian of a potential at a point of the chart.
#[derive(Debug, Clone)]
pub struct Jet2 {
    pub u: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl Jet2 {
    pub fn du(&self) -> f64 {
        self.gradient.norm()
    }

    pub fn laplacian(&self) -> f64 {
        self.hessian.trace()
    }
}

/// Superposition of fundamental solutions around prescribed centers, with
/// total weight playing the role of the mass coefficient in the expansion
/// at infinity.
#[derive(Debug, Clone)]
pub struct MultiCenterField {
    n: u32,
    centers: Vec<(DVector<f64>, f64)>,
}

impl MultiCenterField {
    pub fn new(n: u32, centers: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if n < 3 {
            return Err(Error::Config(format!(
                "multi-center field needs n >= 3, got {n}"
            )));
        }
        if centers.is_empty() {
            return Err(Error::Config("at least one center is required".into()));
        }
        let mut stored = Vec::with_capacity(centers.len());
        for (pos, weight) in centers {
            if pos.len() != n as usize {
                return Err(Error::Config(format!(
                    "center {pos:?} has wrong dimension (expected {n})"
                )));
            }
            if !(weight > 0.0) {
                return Err(Error::Config(format!(
                    "center weight {weight} must be positive"
                )));
            }
            stored.push((DVector::from_vec(pos), weight));
        }
        Ok(Self { n, centers: stored })
    }

    /// Single fundamental solution `u = 1 - m |x|^{2-n}` centered at the
    /// origin.
    pub fn monopole(n: u32, m: f64) -> Result<Self> {
        Self::new(n, vec![(vec![0.0; n as usize], m)])
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn centers(&self) -> &[(DVector<f64>, f64)] {
        &self.centers
    }

    /// Total weight `sum m_i`; the leading coefficient of `1 - u` at
    /// infinity.
    pub fn total_mass(&self) -> f64 {
        self.centers.iter().map(|(_, m)| m).sum()
    }

    pub fn is_monopole(&self) -> bool {
        self.centers.len() == 1
    }

    fn min_center_distance(&self, x: &DVector<f64>) -> f64 {
        self.centers
            .iter()
            .map(|(c, _)| (x - c).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Potential value only; the cheap path for isosurface corner scans.
    pub fn value(&self, x: &[f64]) -> f64 {
        let nf = f64::from(self.n);
        let mut acc = 0.0;
        for (c, m) in &self.centers {
            let mut r2 = 0.0;
            for (xi, ci) in x.iter().zip(c.iter()) {
                let d = xi - ci;
                r2 += d * d;
            }
            acc += m * r2.powf((2.0 - nf) / 2.0);
        }
        1.0 - acc
    }

    /// Value, gradient and Hessian, exact to rounding. Rejects evaluation
    /// closer than `1e-12` to a singular center.
    pub fn evaluate(&self, x: &[f64]) -> Result<Jet2> {
        let dim = self.n as usize;
        if x.len() != dim {
            return Err(Error::Domain(format!(
                "point has dimension {}, field has {dim}",
                x.len()
            )));
        }
        let xv = DVector::from_column_slice(x);
        if self.min_center_distance(&xv) < 1e-12 {
            return Err(Error::Domain(
                "evaluation at a singular center of the field".into(),
            ));
        }
        let nf = f64::from(self.n);
        let mut u = 1.0;
        let mut gradient = DVector::zeros(dim);
        let mut hessian = DMatrix::zeros(dim, dim);
        for (c, m) in &self.centers {
            let y = &xv - c;
            let r = y.norm();
            let r_pow_mn = r.powf(-nf);
            u -= m * r_pow_mn * r * r; // m r^{2-n}
            // grad contribution: m (n-2) r^{-n} y
            let gscale = m * (nf - 2.0) * r_pow_mn;
            gradient += gscale * &y;
            // hessian contribution: m (n-2) (r^{-n} I - n r^{-n-2} y y^T)
            let hscale = m * (nf - 2.0) * r_pow_mn;
            for a in 0..dim {
                for b in 0..dim {
                    let mut v = -nf / (r * r) * y[a] * y[b];
                    if a == b {
                        v += 1.0;
                    }
                    hessian[(a, b)] += hscale * v;
                }
            }
        }
        Ok(Jet2 {
            u,
            gradient,
            hessian,
        })
    }
}

/// Axis-aligned search box with a seed lattice resolution.
#[derive(Debug, Clone)]
pub struct SearchBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub seeds_per_axis: usize,
}

/// Approximate zeros of the gradient inside the box, found by Newton
/// iteration from every lattice seed and deduplicated by the seed spacing.
/// The returned list may be empty.
pub fn critical_points(field: &MultiCenterField, search: &SearchBox) -> Result<Vec<Vec<f64>>> {
    let dim = field.n() as usize;
    if search.lo.len() != dim || search.hi.len() != dim {
        return Err(Error::Config("search box dimension mismatch".into()));
    }
    if search.seeds_per_axis < 2 {
        return Err(Error::Config("need at least 2 seeds per axis".into()));
    }
    let spacing: Vec<f64> = (0..dim)
        .map(|d| (search.hi[d] - search.lo[d]) / (search.seeds_per_axis - 1) as f64)
        .collect();
    let min_spacing = spacing.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut found: Vec<Vec<f64>> = Vec::new();

    let mut index = vec![0usize; dim];
    loop {
        let seed: Vec<f64> = (0..dim)
            .map(|d| search.lo[d] + spacing[d] * index[d] as f64)
            .collect();
        if let Some(root) = newton_gradient_zero(field, &seed, search, min_spacing) {
            let fresh = found
                .iter()
                .all(|p| distance(p, &root) > min_spacing);
            if fresh {
                found.push(root);
            }
        }
        // Advance the multi-index.
        let mut d = 0;
        loop {
            index[d] += 1;
            if index[d] < search.seeds_per_axis {
                break;
            }
            index[d] = 0;
            d += 1;
            if d == dim {
                return Ok(found);
            }
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn newton_gradient_zero(
    field: &MultiCenterField,
    seed: &[f64],
    search: &SearchBox,
    scale: f64,
) -> Option<Vec<f64>> {
    let dim = seed.len();
    let mut x = DVector::from_column_slice(seed);
    for _ in 0..60 {
        let jet = match field.evaluate(x.as_slice()) {
            Ok(j) => j,
            Err(_) => return None, // walked into a center
        };
        let gnorm = jet.gradient.norm();
        if gnorm < 1e-13 {
            break;
        }
        let step = jet.hessian.clone().lu().solve(&(-&jet.gradient))?;
        // Keep the iteration from shooting across the domain.
        let max_step = 2.0 * scale;
        let snorm = step.norm();
        let clipped = if snorm > max_step {
            step * (max_step / snorm)
        } else {
            step
        };
        x += clipped;
        for d in 0..dim {
            let margin = 0.5 * (search.hi[d] - search.lo[d]);
            if x[d] < search.lo[d] - margin || x[d] > search.hi[d] + margin {
                return None;
            }
        }
    }
    let jet = field.evaluate(x.as_slice()).ok()?;
    if jet.gradient.norm() < 1e-10 {
        let inside = (0..dim).all(|d| x[d] >= search.lo[d] - 1e-9 && x[d] <= search.hi[d] + 1e-9);
        inside.then(|| x.as_slice().to_vec())
    } else {
        None
    }
}
