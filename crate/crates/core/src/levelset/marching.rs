//! Isosurface polygonization by marching tetrahedra on the Freudenthal
//! 6-tetrahedron cell decomposition with linear edge interpolation.
//!
//! The Freudenthal split is face-to-face consistent across neighboring
//! cells, and interpolated vertices are keyed by their (sorted) global edge
//! so shared vertices are bitwise identical. Connectivity of the mesh is
//! therefore exact, which is what the component counting relies on.

use rayon::prelude::*;

/// One triangle of the polygonized surface. Vertices are chart positions;
/// `edges` are the global edge keys that generated them.
#[derive(Debug, Clone)]
pub struct Triangle {
    pub vertices: [[f64; 3]; 3],
    pub edges: [(u64, u64); 3],
}

impl Triangle {
    pub fn area(&self) -> f64 {
        let [a, b, c] = &self.vertices;
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let cx = u[1] * v[2] - u[2] * v[1];
        let cy = u[2] * v[0] - u[0] * v[2];
        let cz = u[0] * v[1] - u[1] * v[0];
        0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
    }

    pub fn centroid(&self) -> [f64; 3] {
        let [a, b, c] = &self.vertices;
        [
            (a[0] + b[0] + c[0]) / 3.0,
            (a[1] + b[1] + c[1]) / 3.0,
            (a[2] + b[2] + c[2]) / 3.0,
        ]
    }
}

/// Uniform sampling box for the polygonizer: `cells` cubes per axis on
/// `[lo, hi]^3` around `center`.
#[derive(Debug, Clone, Copy)]
pub struct SampleBox {
    pub center: [f64; 3],
    pub half_width: f64,
    pub cells: usize,
}

impl SampleBox {
    fn corner(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let h = 2.0 * self.half_width / self.cells as f64;
        [
            self.center[0] - self.half_width + h * i as f64,
            self.center[1] - self.half_width + h * j as f64,
            self.center[2] - self.half_width + h * k as f64,
        ]
    }
}

/// Freudenthal tetrahedra: vertex paths from (0,0,0) to (1,1,1) adding one
/// axis step at a time, one tetrahedron per axis permutation.
const TET_PATHS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Extracts the level set `{f = level}` as a triangle soup. Corner values
/// are sampled once; cells are processed in deterministic slab order.
pub fn polygonize<F: Fn(&[f64; 3]) -> f64 + Sync>(
    f: &F,
    level: f64,
    sample: &SampleBox,
) -> Vec<Triangle> {
    let n = sample.cells;
    let nn = n + 1;
    let corner_index = |i: usize, j: usize, k: usize| -> u64 { (i + nn * (j + nn * k)) as u64 };

    // Corner scan, parallel over z-planes.
    let values: Vec<f64> = (0..nn * nn * nn)
        .into_par_iter()
        .map(|id| {
            let i = id % nn;
            let j = (id / nn) % nn;
            let k = id / (nn * nn);
            f(&sample.corner(i, j, k))
        })
        .collect();

    let mut slabs: Vec<Vec<Triangle>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut triangles = Vec::new();
            for j in 0..n {
                for i in 0..n {
                    // Quick straddle test for the whole cell.
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for dz in 0..2 {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let v = values
                                    [(i + dx) + nn * ((j + dy) + nn * (k + dz))];
                                lo = lo.min(v);
                                hi = hi.max(v);
                            }
                        }
                    }
                    if lo >= level || hi < level {
                        continue;
                    }
                    for path in &TET_PATHS {
                        // Build the tetrahedron corner offsets along the path.
                        let mut offs = [[0usize; 3]; 4];
                        for (step, axis) in path.iter().enumerate() {
                            offs[step + 1] = offs[step];
                            offs[step + 1][*axis] += 1;
                        }
                        let mut ids = [0u64; 4];
                        let mut vals = [0.0f64; 4];
                        let mut pts = [[0.0f64; 3]; 4];
                        for (v, off) in offs.iter().enumerate() {
                            let (ci, cj, ck) = (i + off[0], j + off[1], k + off[2]);
                            ids[v] = corner_index(ci, cj, ck);
                            vals[v] = values[ci + nn * (cj + nn * ck)];
                            pts[v] = sample.corner(ci, cj, ck);
                        }
                        march_tet(level, &ids, &vals, &pts, &mut triangles);
                    }
                }
            }
            triangles
        })
        .collect();

    let mut out = Vec::new();
    for slab in &mut slabs {
        out.append(slab);
    }
    out
}

fn march_tet(
    level: f64,
    ids: &[u64; 4],
    vals: &[f64; 4],
    pts: &[[f64; 3]; 4],
    out: &mut Vec<Triangle>,
) {
    let inside: Vec<usize> = (0..4).filter(|&v| vals[v] < level).collect();
    let outside: Vec<usize> = (0..4).filter(|&v| vals[v] >= level).collect();
    let cut = |a: usize, b: usize| -> ([f64; 3], (u64, u64)) {
        // Canonical edge orientation by global corner id keeps shared
        // vertices bitwise identical across tetrahedra and cells.
        let (lo, hi) = if ids[a] < ids[b] { (a, b) } else { (b, a) };
        let (va, vb) = (vals[lo], vals[hi]);
        let t = (level - va) / (vb - va);
        let p = [
            pts[lo][0] + t * (pts[hi][0] - pts[lo][0]),
            pts[lo][1] + t * (pts[hi][1] - pts[lo][1]),
            pts[lo][2] + t * (pts[hi][2] - pts[lo][2]),
        ];
        (p, (ids[lo], ids[hi]))
    };
    match inside.len() {
        1 => {
            let a = inside[0];
            let (p0, e0) = cut(a, outside[0]);
            let (p1, e1) = cut(a, outside[1]);
            let (p2, e2) = cut(a, outside[2]);
            out.push(Triangle {
                vertices: [p0, p1, p2],
                edges: [e0, e1, e2],
            });
        }
        3 => {
            let a = outside[0];
            let (p0, e0) = cut(a, inside[0]);
            let (p1, e1) = cut(a, inside[1]);
            let (p2, e2) = cut(a, inside[2]);
            out.push(Triangle {
                vertices: [p0, p1, p2],
                edges: [e0, e1, e2],
            });
        }
        2 => {
            let (a0, a1) = (inside[0], inside[1]);
            let (b0, b1) = (outside[0], outside[1]);
            let (q00, e00) = cut(a0, b0);
            let (q01, e01) = cut(a0, b1);
            let (q11, e11) = cut(a1, b1);
            let (q10, e10) = cut(a1, b0);
            out.push(Triangle {
                vertices: [q00, q01, q11],
                edges: [e00, e01, e11],
            });
            out.push(Triangle {
                vertices: [q00, q11, q10],
                edges: [e00, e11, e10],
            });
        }
        _ => {}
    }
}

/// Number of connected components of the triangle mesh, by union-find over
/// the exact edge-key vertices.
pub fn component_count(triangles: &[Triangle]) -> usize {
    use std::collections::HashMap;
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut parent: Vec<usize> = Vec::new();
    let mut key_of = |e: (u64, u64), parent: &mut Vec<usize>| -> usize {
        *index.entry(e).or_insert_with(|| {
            parent.push(parent.len());
            parent.len() - 1
        })
    };
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for tri in triangles {
        let k0 = key_of(tri.edges[0], &mut parent);
        let k1 = key_of(tri.edges[1], &mut parent);
        let k2 = key_of(tri.edges[2], &mut parent);
        let r0 = find(&mut parent, k0);
        let r1 = find(&mut parent, k1);
        let r2 = find(&mut parent, k2);
        parent[r1] = r0;
        let r0b = find(&mut parent, r0);
        parent[r2] = r0b;
    }
    let mut roots = std::collections::HashSet::new();
    for i in 0..parent.len() {
        let r = find(&mut parent, i);
        roots.insert(r);
    }
    roots.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_area_converges() {
        let f = |p: &[f64; 3]| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let sample = SampleBox {
            center: [0.0; 3],
            half_width: 1.4,
            cells: 64,
        };
        let tris = polygonize(&f, 1.0, &sample);
        let area: f64 = tris.iter().map(Triangle::area).sum();
        let exact = 4.0 * std::f64::consts::PI;
        assert!(
            ((area - exact) / exact).abs() < 2e-3,
            "area {area} vs {exact}"
        );
        assert_eq!(component_count(&tris), 1);
    }

    #[test]
    fn two_spheres_are_two_components() {
        let f = |p: &[f64; 3]| {
            let d1 =
                ((p[0] - 0.6).powi(2) + p[1] * p[1] + p[2] * p[2]).sqrt();
            let d2 =
                ((p[0] + 0.6).powi(2) + p[1] * p[1] + p[2] * p[2]).sqrt();
            d1.min(d2)
        };
        let sample = SampleBox {
            center: [0.0; 3],
            half_width: 1.5,
            cells: 48,
        };
        let tris = polygonize(&f, 0.35, &sample);
        assert_eq!(component_count(&tris), 2);
    }

    #[test]
    fn empty_when_level_not_attained() {
        let f = |p: &[f64; 3]| p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        let sample = SampleBox {
            center: [0.0; 3],
            half_width: 1.0,
            cells: 16,
        };
        assert!(polygonize(&f, 9.0, &sample).is_empty());
    }
}
