//! Finite-difference Dirichlet solver for `Delta u = 0` on a 3-D exterior
//! box domain: uniform Cartesian grid, excised balls carrying constant
//! Dirichlet data imposed on the true sphere through Shortley-Weller legs,
//! outer box faces carrying the leading expansion `1 - m |x|^{2-n}`.
//!
//! The iteration is red-black SOR with the Chebyshev relaxation schedule.
//! Sweeps over one color touch disjoint nodes and read only the other
//! color, so the parallel sweep is bitwise identical to the serial one.

use std::collections::HashMap;
use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::Jet2;
use nalgebra::{DMatrix, DVector};

const FLAG_REGULAR: u8 = 0;
const FLAG_IRREGULAR: u8 = 1;
const FLAG_DIRICHLET: u8 = 2;

/// Smallest admissible Shortley-Weller leg fraction. A node whose leg to
/// the sphere is shorter sits (numerically) on the boundary and is pinned
/// to the boundary value instead; clamping the leg would displace the
/// boundary by `MIN_LEG * h` and cost an order of convergence.
const MIN_LEG: f64 = 1e-3;

/// A ball removed from the computational domain; the potential takes the
/// constant `value` on its surface.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Excision {
    pub center: [f64; 3],
    pub radius: f64,
    pub value: f64,
}

/// Dirichlet data on the outer box faces.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuterData {
    /// The leading asymptotic expansion `1 - m |x|^{2-n}` (n = 3 here).
    Monopole { m: f64 },
    Constant { value: f64 },
}

impl OuterData {
    fn eval(&self, x: &[f64; 3]) -> f64 {
        match self {
            OuterData::Monopole { m } => {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                1.0 - m / r
            }
            OuterData::Constant { value } => *value,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub dims: [usize; 3],
    pub excisions: Vec<Excision>,
    pub outer: OuterData,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl GridSpec {
    /// Cube `[-half_width, half_width]^3` sampled with spacing `h`.
    pub fn cube(half_width: f64, h: f64, excisions: Vec<Excision>, outer: OuterData) -> Self {
        let nodes = (2.0 * half_width / h).round() as usize + 1;
        Self {
            origin: [-half_width; 3],
            spacing: h,
            dims: [nodes; 3],
            excisions,
            outer,
            tolerance: 1e-10,
            max_sweeps: 100_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d < 4) {
            return Err(Error::Config("grid needs at least 4 nodes per axis".into()));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::Config("grid spacing must be positive".into()));
        }
        for e in &self.excisions {
            if !(e.radius > 0.0) {
                return Err(Error::Config("excision radius must be positive".into()));
            }
            for d in 0..3 {
                let lo = self.origin[d];
                let hi = self.origin[d] + self.spacing * (self.dims[d] - 1) as f64;
                if e.center[d] - e.radius <= lo + self.spacing
                    || e.center[d] + e.radius >= hi - self.spacing
                {
                    return Err(Error::Config(format!(
                        "excision at {:?} with radius {} is not strictly inside the grid",
                        e.center, e.radius
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Convergence record of a solve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveReport {
    pub sweeps: usize,
    pub residual: f64,
    pub relaxation: f64,
}

#[derive(Debug, Clone, Copy)]
enum Term {
    Node(usize),
    Fixed(f64),
}

/// Unequal-arm stencil for nodes adjacent to an excised sphere.
#[derive(Debug, Clone)]
struct SwStencil {
    terms: [(f64, Term); 6],
    center: f64,
}

/// Solved nodal field over a [`GridSpec`].
#[derive(Debug, Clone)]
pub struct GridField {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub dims: [usize; 3],
    pub values: Vec<f64>,
    flags: Vec<u8>,
    pub report: SolveReport,
}

struct SyncPtr(*mut f64);
unsafe impl Sync for SyncPtr {}
unsafe impl Send for SyncPtr {}

/// Solves the Dirichlet problem described by `spec`. The returned field
/// reports the sweep count and achieved residual (the max-norm of the
/// Jacobi update, in solution units).
pub fn solve_dirichlet(spec: &GridSpec) -> Result<GridField> {
    spec.validate()?;
    let [nx, ny, nz] = spec.dims;
    let h = spec.spacing;
    let total = nx * ny * nz;
    let idx = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let pos = |i: usize, j: usize, k: usize| -> [f64; 3] {
        [
            spec.origin[0] + h * i as f64,
            spec.origin[1] + h * j as f64,
            spec.origin[2] + h * k as f64,
        ]
    };

    let mut values = vec![0.0f64; total];
    let mut flags = vec![FLAG_REGULAR; total];

    // Classify nodes and seed with the outer data (a good initial guess for
    // exterior problems; the iteration still converges to the discrete
    // solution from any start).
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let p = pos(i, j, k);
                let id = idx(i, j, k);
                let on_face =
                    i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1;
                let inside_ball = spec
                    .excisions
                    .iter()
                    .find(|e| dist2(&p, &e.center) < e.radius * e.radius);
                if let Some(e) = inside_ball {
                    flags[id] = FLAG_DIRICHLET;
                    values[id] = e.value;
                } else if on_face {
                    flags[id] = FLAG_DIRICHLET;
                    values[id] = spec.outer.eval(&p);
                } else {
                    values[id] = spec.outer.eval(&p);
                }
            }
        }
    }

    // Shortley-Weller stencils for interior nodes with an excised neighbor.
    let mut irregular: HashMap<usize, SwStencil> = HashMap::new();
    let neighbor_steps = [
        (-1i64, 0i64, 0i64),
        (1, 0, 0),
        (0, -1, 0),
        (0, 1, 0),
        (0, 0, -1),
        (0, 0, 1),
    ];
    for k in 1..nz - 1 {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let id = idx(i, j, k);
                if flags[id] == FLAG_DIRICHLET {
                    continue;
                }
                let p = pos(i, j, k);
                let mut legs = [1.0f64; 6];
                let mut foot_values = [0.0f64; 6];
                let mut any_cut = false;
                for (d, step) in neighbor_steps.iter().enumerate() {
                    let ni = (i as i64 + step.0) as usize;
                    let nj = (j as i64 + step.1) as usize;
                    let nk = (k as i64 + step.2) as usize;
                    let nid = idx(ni, nj, nk);
                    let np = pos(ni, nj, nk);
                    let cut = spec
                        .excisions
                        .iter()
                        .find(|e| dist2(&np, &e.center) < e.radius * e.radius);
                    if let Some(e) = cut {
                        let axis = d / 2;
                        let sign = if d % 2 == 0 { -1.0 } else { 1.0 };
                        legs[d] = sphere_leg(&p, &e.center, e.radius, axis, sign, h);
                        foot_values[d] = e.value;
                        any_cut = true;
                        let _ = nid;
                    }
                }
                if let Some(d) = (0..6).find(|&d| legs[d] < MIN_LEG) {
                    // The sphere passes through (or hugs) this node.
                    flags[id] = FLAG_DIRICHLET;
                    values[id] = foot_values[d];
                    continue;
                }
                if any_cut {
                    let mut terms = [(0.0, Term::Fixed(0.0)); 6];
                    let mut center = 0.0;
                    for axis in 0..3 {
                        let a = legs[2 * axis] * h;
                        let b = legs[2 * axis + 1] * h;
                        center += 2.0 / (a * b);
                        for side in 0..2 {
                            let d = 2 * axis + side;
                            let leg = if side == 0 { a } else { b };
                            let coeff = 2.0 / (leg * (a + b));
                            let term = if legs[d] < 1.0 {
                                Term::Fixed(foot_values[d])
                            } else {
                                let step = neighbor_steps[d];
                                Term::Node(idx(
                                    (i as i64 + step.0) as usize,
                                    (j as i64 + step.1) as usize,
                                    (k as i64 + step.2) as usize,
                                ))
                            };
                            terms[d] = (coeff, term);
                        }
                    }
                    flags[id] = FLAG_IRREGULAR;
                    irregular.insert(id, SwStencil { terms, center });
                }
            }
        }
    }

    // Chebyshev relaxation schedule on the Jacobi spectral-radius estimate
    // of the bounding box (the excision only shrinks the domain).
    let rho = (std::f64::consts::PI / (nx - 1) as f64).cos() / 3.0
        + (std::f64::consts::PI / (ny - 1) as f64).cos() / 3.0
        + (std::f64::consts::PI / (nz - 1) as f64).cos() / 3.0;
    let rho2 = rho * rho;
    let mut omega = 1.0f64;
    let mut final_residual = f64::INFINITY;
    let mut sweeps_done = 0usize;

    for sweep in 1..=spec.max_sweeps {
        for color in 0..2usize {
            sor_color_sweep(
                &mut values,
                &flags,
                &irregular,
                spec.dims,
                color,
                omega,
            );
            omega = if sweep == 1 && color == 0 {
                1.0 / (1.0 - rho2 / 2.0)
            } else {
                1.0 / (1.0 - rho2 * omega / 4.0)
            };
        }
        sweeps_done = sweep;
        if sweep % 10 == 0 || sweep == spec.max_sweeps {
            final_residual = jacobi_residual(&values, &flags, &irregular, spec.dims);
            if final_residual < spec.tolerance {
                break;
            }
        }
    }
    if final_residual >= spec.tolerance {
        return Err(Error::NonConvergence {
            residual: final_residual,
            sweeps: sweeps_done,
            tolerance: spec.tolerance,
        });
    }

    Ok(GridField {
        origin: spec.origin,
        spacing: h,
        dims: spec.dims,
        values,
        flags,
        report: SolveReport {
            sweeps: sweeps_done,
            residual: final_residual,
            relaxation: omega,
        },
    })
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Fraction `theta in (0, 1]` of the grid arm from `p` along `axis`
/// (direction `sign`) at which the sphere `|x - c| = radius` is crossed.
fn sphere_leg(p: &[f64; 3], c: &[f64; 3], radius: f64, axis: usize, sign: f64, h: f64) -> f64 {
    let y = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
    let rho2 = dist2(p, c) - y[axis] * y[axis];
    let w2 = radius * radius - rho2;
    if w2 <= 0.0 {
        return 1.0; // grazing arm; treat the full leg as uncut
    }
    let w = w2.sqrt();
    // Nodes sitting exactly on the sphere produce theta = 0; keep it (the
    // caller clamps to MIN_LEG) instead of falling back to a full leg,
    // which would displace the boundary by a whole cell.
    let mut best = f64::INFINITY;
    for target in [w, -w] {
        let theta = (target - y[axis]) / (sign * h);
        if (-1e-12..=1.0 + 1e-12).contains(&theta) {
            best = best.min(theta.clamp(0.0, 1.0));
        }
    }
    if best.is_finite() {
        best
    } else {
        1.0
    }
}

fn sor_color_sweep(
    values: &mut [f64],
    flags: &[u8],
    irregular: &HashMap<usize, SwStencil>,
    dims: [usize; 3],
    color: usize,
    omega: f64,
) {
    let [nx, ny, nz] = dims;
    let ptr = SyncPtr(values.as_mut_ptr());
    let values_ref: &[f64] = unsafe { std::slice::from_raw_parts(ptr.0, values.len()) };
    (1..nz - 1).into_par_iter().for_each(|k| {
        let p = &ptr;
        for j in 1..ny - 1 {
            let start = 1 + (1 + j + k + color) % 2;
            let row = nx * (j + ny * k);
            let mut i = start;
            while i < nx - 1 {
                let id = row + i;
                match flags[id] {
                    FLAG_REGULAR => {
                        let sum = values_ref[id - 1]
                            + values_ref[id + 1]
                            + values_ref[id - nx]
                            + values_ref[id + nx]
                            + values_ref[id - nx * ny]
                            + values_ref[id + nx * ny];
                        let new = (1.0 - omega) * values_ref[id] + omega * sum / 6.0;
                        unsafe { *p.0.add(id) = new };
                    }
                    FLAG_IRREGULAR => {
                        let st = &irregular[&id];
                        let mut rhs = 0.0;
                        for (coeff, term) in &st.terms {
                            rhs += coeff
                                * match term {
                                    Term::Node(nid) => values_ref[*nid],
                                    Term::Fixed(v) => *v,
                                };
                        }
                        let new = (1.0 - omega) * values_ref[id] + omega * rhs / st.center;
                        unsafe { *p.0.add(id) = new };
                    }
                    _ => {}
                }
                i += 2;
            }
        }
    });
}

fn jacobi_residual(
    values: &[f64],
    flags: &[u8],
    irregular: &HashMap<usize, SwStencil>,
    dims: [usize; 3],
) -> f64 {
    let [nx, ny, nz] = dims;
    (1..nz - 1)
        .into_par_iter()
        .map(|k| {
            let mut local: f64 = 0.0;
            for j in 1..ny - 1 {
                for i in 1..nx - 1 {
                    let id = i + nx * (j + ny * k);
                    match flags[id] {
                        FLAG_REGULAR => {
                            let sum = values[id - 1]
                                + values[id + 1]
                                + values[id - nx]
                                + values[id + nx]
                                + values[id - nx * ny]
                                + values[id + nx * ny];
                            local = local.max((sum / 6.0 - values[id]).abs());
                        }
                        FLAG_IRREGULAR => {
                            let st = &irregular[&id];
                            let mut rhs = 0.0;
                            for (coeff, term) in &st.terms {
                                rhs += coeff
                                    * match term {
                                        Term::Node(nid) => values[*nid],
                                        Term::Fixed(v) => *v,
                                    };
                            }
                            local = local.max((rhs / st.center - values[id]).abs());
                        }
                        _ => {}
                    }
                }
            }
            local
        })
        .reduce(|| 0.0, f64::max)
}

impl GridField {
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + self.spacing * i as f64,
            self.origin[1] + self.spacing * j as f64,
            self.origin[2] + self.spacing * k as f64,
        ]
    }

    pub fn is_dirichlet(&self, i: usize, j: usize, k: usize) -> bool {
        self.flags[self.index(i, j, k)] == FLAG_DIRICHLET
    }

    /// Max nodal error against a reference solution over solved nodes.
    pub fn max_error_vs<F: Fn(&[f64; 3]) -> f64>(&self, reference: F) -> f64 {
        let [nx, ny, nz] = self.dims;
        let mut err: f64 = 0.0;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let id = self.index(i, j, k);
                    if self.flags[id] == FLAG_DIRICHLET {
                        continue;
                    }
                    let p = self.node_position(i, j, k);
                    err = err.max((self.values[id] - reference(&p)).abs());
                }
            }
        }
        err
    }

    /// Range of solved (non-Dirichlet) nodal values.
    pub fn interior_range(&self) -> (f64, f64) {
        self.range_by(|f| f != FLAG_DIRICHLET)
    }

    /// Range of Dirichlet nodal values.
    pub fn boundary_range(&self) -> (f64, f64) {
        self.range_by(|f| f == FLAG_DIRICHLET)
    }

    fn range_by<F: Fn(u8) -> bool>(&self, keep: F) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (v, f) in self.values.iter().zip(&self.flags) {
            if keep(*f) {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        (lo, hi)
    }

    /// Discrete flux of `grad u` through the closed dual surface `offset`
    /// layers inside the outer boundary: one face difference per dual face,
    /// each carrying the full `h^2` area. Summing the 7-point equation over
    /// the enclosed nodes telescopes exactly onto this sum, so the value
    /// does not depend on `offset` as long as the shell encloses every
    /// excision. That makes it the grid counterpart of the level-set flux
    /// integral.
    pub fn dual_shell_flux(&self, offset: usize) -> Result<f64> {
        let [nx, ny, nz] = self.dims;
        let o = offset;
        if o + 2 >= nx / 2 || o + 2 >= ny / 2 || o + 2 >= nz / 2 {
            return Err(Error::Config(format!(
                "dual shell offset {o} leaves no interior"
            )));
        }
        let (i0, i1) = (o, nx - 1 - o);
        let (j0, j1) = (o, ny - 1 - o);
        let (k0, k1) = (o, nz - 1 - o);
        let h = self.spacing;
        let mut flux = 0.0;
        // +x and -x faces of the node box [i0..i1] x [j0..j1] x [k0..k1].
        for k in k0..=k1 {
            for j in j0..=j1 {
                flux += self.values[self.index(i1 + 1, j, k)]
                    - self.values[self.index(i1, j, k)];
                flux += self.values[self.index(i0 - 1, j, k)]
                    - self.values[self.index(i0, j, k)];
            }
        }
        for k in k0..=k1 {
            for i in i0..=i1 {
                flux += self.values[self.index(i, j1 + 1, k)]
                    - self.values[self.index(i, j1, k)];
                flux += self.values[self.index(i, j0 - 1, k)]
                    - self.values[self.index(i, j0, k)];
            }
        }
        for j in j0..=j1 {
            for i in i0..=i1 {
                flux += self.values[self.index(i, j, k1 + 1)]
                    - self.values[self.index(i, j, k1)];
                flux += self.values[self.index(i, j, k0 - 1)]
                    - self.values[self.index(i, j, k0)];
            }
        }
        Ok(flux * h)
    }

    /// Potential value by trilinear interpolation.
    pub fn value(&self, x: &[f64]) -> f64 {
        let (cell, frac) = self.locate(x);
        let mut acc = 0.0;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let w = tri_w(frac[0], dx) * tri_w(frac[1], dy) * tri_w(frac[2], dz);
                    acc += w
                        * self.values[self.index(cell[0] + dx, cell[1] + dy, cell[2] + dz)];
                }
            }
        }
        acc
    }

    fn locate(&self, x: &[f64]) -> ([usize; 3], [f64; 3]) {
        let mut cell = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for (d, (c, f)) in cell.iter_mut().zip(frac.iter_mut()).enumerate() {
            let t = (x[d] - self.origin[d]) / self.spacing;
            let i = (t.floor() as i64).clamp(0, self.dims[d] as i64 - 2) as usize;
            *c = i;
            *f = t - i as f64;
        }
        (cell, frac)
    }

    /// Value, gradient and Hessian at an arbitrary interior point: second
    /// order centered stencils at the surrounding nodes, trilinearly
    /// blended. Rejects points whose stencil footprint touches Dirichlet
    /// nodes (excised region or outer faces).
    pub fn evaluate(&self, x: &[f64]) -> Result<Jet2> {
        let (cell, frac) = self.locate(x);
        for (c, dim) in cell.iter().zip(&self.dims) {
            if *c < 1 || c + 2 >= *dim {
                return Err(Error::Domain(format!(
                    "point {x:?} too close to the grid boundary for derivative stencils"
                )));
            }
        }
        // Footprint check: corners plus their stencil neighbors.
        for dz in -1i64..=2 {
            for dy in -1i64..=2 {
                for dx in -1i64..=2 {
                    let id = self.index(
                        (cell[0] as i64 + dx) as usize,
                        (cell[1] as i64 + dy) as usize,
                        (cell[2] as i64 + dz) as usize,
                    );
                    if self.flags[id] == FLAG_DIRICHLET {
                        return Err(Error::Domain(format!(
                            "point {x:?} within the stencil reach of a Dirichlet node"
                        )));
                    }
                }
            }
        }
        let mut u = 0.0;
        let mut grad = DVector::zeros(3);
        let mut hess = DMatrix::zeros(3, 3);
        let h = self.spacing;
        for dz in 0..2usize {
            for dy in 0..2usize {
                for dx in 0..2usize {
                    let w = tri_w(frac[0], dx) * tri_w(frac[1], dy) * tri_w(frac[2], dz);
                    let (i, j, k) = (cell[0] + dx, cell[1] + dy, cell[2] + dz);
                    let at = |di: i64, dj: i64, dk: i64| {
                        self.values[self.index(
                            (i as i64 + di) as usize,
                            (j as i64 + dj) as usize,
                            (k as i64 + dk) as usize,
                        )]
                    };
                    let c = at(0, 0, 0);
                    u += w * c;
                    grad[0] += w * (at(1, 0, 0) - at(-1, 0, 0)) / (2.0 * h);
                    grad[1] += w * (at(0, 1, 0) - at(0, -1, 0)) / (2.0 * h);
                    grad[2] += w * (at(0, 0, 1) - at(0, 0, -1)) / (2.0 * h);
                    hess[(0, 0)] += w * (at(1, 0, 0) - 2.0 * c + at(-1, 0, 0)) / (h * h);
                    hess[(1, 1)] += w * (at(0, 1, 0) - 2.0 * c + at(0, -1, 0)) / (h * h);
                    hess[(2, 2)] += w * (at(0, 0, 1) - 2.0 * c + at(0, 0, -1)) / (h * h);
                    let hxy = (at(1, 1, 0) - at(1, -1, 0) - at(-1, 1, 0) + at(-1, -1, 0))
                        / (4.0 * h * h);
                    let hxz = (at(1, 0, 1) - at(1, 0, -1) - at(-1, 0, 1) + at(-1, 0, -1))
                        / (4.0 * h * h);
                    let hyz = (at(0, 1, 1) - at(0, 1, -1) - at(0, -1, 1) + at(0, -1, -1))
                        / (4.0 * h * h);
                    hess[(0, 1)] += w * hxy;
                    hess[(1, 0)] += w * hxy;
                    hess[(0, 2)] += w * hxz;
                    hess[(2, 0)] += w * hxz;
                    hess[(1, 2)] += w * hyz;
                    hess[(2, 1)] += w * hyz;
                }
            }
        }
        Ok(Jet2 {
            u,
            gradient: grad,
            hessian: hess,
        })
    }

    /// Flat binary dump: magic, version, dims, spacing, origin, then the
    /// row-major 64-bit nodal values.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"SPGF")?;
        w.write_u32::<LittleEndian>(1)?;
        for d in self.dims {
            w.write_u64::<LittleEndian>(d as u64)?;
        }
        w.write_f64::<LittleEndian>(self.spacing)?;
        for o in self.origin {
            w.write_f64::<LittleEndian>(o)?;
        }
        for v in &self.values {
            w.write_f64::<LittleEndian>(*v)?;
        }
        Ok(())
    }

    /// Reads a binary dump back. Only the nodal data is stored, so the
    /// reloaded field treats the outer faces as Dirichlet and everything
    /// else as solved interior.
    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"SPGF" {
            return Err(Error::Parse("bad grid magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != 1 {
            return Err(Error::Parse(format!("unsupported grid version {version}")));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = r.read_u64::<LittleEndian>()? as usize;
        }
        let spacing = r.read_f64::<LittleEndian>()?;
        let mut origin = [0.0f64; 3];
        for o in &mut origin {
            *o = r.read_f64::<LittleEndian>()?;
        }
        let total = dims[0] * dims[1] * dims[2];
        let mut values = vec![0.0f64; total];
        for v in &mut values {
            *v = r.read_f64::<LittleEndian>()?;
        }
        let mut flags = vec![FLAG_REGULAR; total];
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    if i == 0
                        || j == 0
                        || k == 0
                        || i == dims[0] - 1
                        || j == dims[1] - 1
                        || k == dims[2] - 1
                    {
                        flags[i + dims[0] * (j + dims[1] * k)] = FLAG_DIRICHLET;
                    }
                }
            }
        }
        Ok(Self {
            origin,
            spacing,
            dims,
            values,
            flags,
            report: SolveReport {
                sweeps: 0,
                residual: 0.0,
                relaxation: 0.0,
            },
        })
    }

    /// Nodal CSV (`x,y,z,u`) for inspection.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "x,y,z,u")?;
        let [nx, ny, nz] = self.dims;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let p = self.node_position(i, j, k);
                    writeln!(
                        w,
                        "{},{},{},{}",
                        p[0],
                        p[1],
                        p[2],
                        self.values[self.index(i, j, k)]
                    )?;
                }
            }
        }
        Ok(())
    }
}

fn tri_w(f: f64, side: usize) -> f64 {
    if side == 0 {
        1.0 - f
    } else {
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monopole_spec(h: f64) -> GridSpec {
        GridSpec::cube(
            1.5,
            h,
            vec![Excision {
                center: [0.0; 3],
                radius: 1.0,
                value: 0.0,
            }],
            OuterData::Monopole { m: 1.0 },
        )
    }

    #[test]
    fn constant_outer_data_gives_constant_solution() {
        let spec = GridSpec::cube(1.0, 0.125, vec![], OuterData::Constant { value: 1.0 });
        let field = solve_dirichlet(&spec).unwrap();
        let (lo, hi) = field.interior_range();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monopole_recovery_second_order() {
        let e1 = solve_dirichlet(&monopole_spec(1.0 / 8.0))
            .unwrap()
            .max_error_vs(|p| 1.0 - 1.0 / (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt());
        let e2 = solve_dirichlet(&monopole_spec(1.0 / 16.0))
            .unwrap()
            .max_error_vs(|p| 1.0 - 1.0 / (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt());
        let order = (e1 / e2).log2();
        assert!(
            (1.6..=2.4).contains(&order),
            "errors {e1:.3e} -> {e2:.3e}, order {order:.2}"
        );
    }

    #[test]
    fn two_ball_solution_respects_maximum_principle() {
        let spec = GridSpec::cube(
            2.0,
            0.1,
            vec![
                Excision {
                    center: [-0.8, 0.0, 0.0],
                    radius: 0.45,
                    value: 0.0,
                },
                Excision {
                    center: [0.8, 0.0, 0.0],
                    radius: 0.45,
                    value: 0.0,
                },
            ],
            OuterData::Monopole { m: 0.9 },
        );
        let field = solve_dirichlet(&spec).unwrap();
        let (lo, hi) = field.interior_range();
        let (blo, bhi) = field.boundary_range();
        assert!(lo > blo && hi < bhi, "[{lo}, {hi}] vs [{blo}, {bhi}]");
        assert!(lo > 0.0 && hi < 1.0);
    }

    #[test]
    fn dual_shell_flux_is_shell_independent() {
        let field = solve_dirichlet(&monopole_spec(1.0 / 12.0)).unwrap();
        let f1 = field.dual_shell_flux(1).unwrap();
        let f2 = field.dual_shell_flux(3).unwrap();
        assert!(
            ((f1 - f2) / f1).abs() < 1e-9,
            "flux drifts across shells: {f1} vs {f2}"
        );
        // 4 pi m for the monopole.
        let exact = 4.0 * std::f64::consts::PI;
        assert!(((f1 - exact) / exact).abs() < 5e-3);
    }

    #[test]
    fn evaluate_matches_analytic_derivatives() {
        let field = solve_dirichlet(&monopole_spec(1.0 / 24.0)).unwrap();
        let x = [1.21, 0.13, -0.22];
        let jet = field.evaluate(&x).unwrap();
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        assert!((jet.u - (1.0 - 1.0 / r)).abs() < 2e-3);
        let exact_du = 1.0 / (r * r);
        assert!(
            (jet.du() - exact_du).abs() / exact_du < 2e-2,
            "du = {} vs {exact_du}",
            jet.du()
        );
        // Rejects points with Dirichlet nodes in the stencil reach.
        assert!(field.evaluate(&[1.0, 0.0, 0.0]).is_err());
        assert!(field.evaluate(&[1.49, 0.0, 0.0]).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let field = solve_dirichlet(&monopole_spec(0.25)).unwrap();
        let mut buf = Vec::new();
        field.write_binary(&mut buf).unwrap();
        let back = GridField::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back.dims, field.dims);
        assert_eq!(back.values, field.values);
        assert_eq!(back.spacing, field.spacing);
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut spec = monopole_spec(0.25);
        spec.excisions[0].radius = 2.0;
        assert!(matches!(solve_dirichlet(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn nonconvergence_is_reported() {
        let mut spec = monopole_spec(0.125);
        spec.max_sweeps = 3;
        assert!(matches!(
            solve_dirichlet(&spec),
            Err(Error::NonConvergence { .. })
        ));
    }
}
