//! Continuous Lagrange spaces on the active band.

use crate::geometry::cut::barycentric;
use crate::mesh::{ActiveBand, Point};
use crate::{Error, Result};

/// Local edges of a tetrahedron; P2 edge node `4 + e` sits on `EDGES[e]`.
pub const EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

pub const MAX_LOCAL: usize = 10;

/// Basis values and physical gradients at one point, padded to ten entries.
#[derive(Debug, Clone, Copy)]
pub struct BasisEval {
    pub n: usize,
    pub values: [f64; MAX_LOCAL],
    pub grads: [[f64; 3]; MAX_LOCAL],
}

/// Gradients of the barycentric coordinates (constant per tet).
pub fn barycentric_gradients(p: &[Point; 4]) -> [[f64; 3]; 4] {
    let e = [0, 1, 2].map(|i| {
        [
            p[i + 1][0] - p[0][0],
            p[i + 1][1] - p[0][1],
            p[i + 1][2] - p[0][2],
        ]
    });
    let c = |a: &[f64; 3], b: &[f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let rows = [c(&e[1], &e[2]), c(&e[2], &e[0]), c(&e[0], &e[1])];
    let det = e[0][0] * rows[0][0] + e[0][1] * rows[0][1] + e[0][2] * rows[0][2];
    let g1 = rows[0].map(|v| v / det);
    let g2 = rows[1].map(|v| v / det);
    let g3 = rows[2].map(|v| v / det);
    let g0 = [0, 1, 2].map(|k| -(g1[k] + g2[k] + g3[k]));
    [g0, g1, g2, g3]
}

/// Lagrange basis of degree 1 or 2 in barycentric form.
pub fn eval_reference(degree: usize, l: &[f64; 4], gl: &[[f64; 3]; 4]) -> BasisEval {
    let mut out = BasisEval {
        n: 0,
        values: [0.0; MAX_LOCAL],
        grads: [[0.0; 3]; MAX_LOCAL],
    };
    if degree == 1 {
        out.n = 4;
        for i in 0..4 {
            out.values[i] = l[i];
            out.grads[i] = gl[i];
        }
    } else {
        out.n = 10;
        for i in 0..4 {
            out.values[i] = l[i] * (2.0 * l[i] - 1.0);
            let s = 4.0 * l[i] - 1.0;
            out.grads[i] = gl[i].map(|g| s * g);
        }
        for (e, &(i, j)) in EDGES.iter().enumerate() {
            out.values[4 + e] = 4.0 * l[i] * l[j];
            out.grads[4 + e] = [0, 1, 2].map(|k| 4.0 * (l[i] * gl[j][k] + l[j] * gl[i][k]));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct DiscreteSpace {
    pub degree: usize,
    pub components: usize,
    /// Number of scalar nodes.
    pub node_count: usize,
    /// Global node of every local node, `nloc` entries per band tet.
    pub dof_map: Vec<usize>,
    pub node_coords: Vec<Point>,
    tet_points: Vec<[Point; 4]>,
    grad_lambda: Vec<[[f64; 3]; 4]>,
}

impl DiscreteSpace {
    pub fn local_count(&self) -> usize {
        if self.degree == 1 {
            4
        } else {
            10
        }
    }

    /// Total number of unknowns; vector unknowns are interleaved `node·3 + c`.
    pub fn dof_count(&self) -> usize {
        self.node_count * self.components
    }

    pub fn tet_count(&self) -> usize {
        self.tet_points.len()
    }

    pub fn local_nodes(&self, k: usize) -> &[usize] {
        let n = self.local_count();
        &self.dof_map[k * n..(k + 1) * n]
    }

    pub fn tet_points(&self, k: usize) -> &[Point; 4] {
        &self.tet_points[k]
    }

    pub fn grad_lambda(&self, k: usize) -> &[[f64; 3]; 4] {
        &self.grad_lambda[k]
    }

    /// Basis at given barycentric coordinates of band tet `k`.
    pub fn eval_bary(&self, k: usize, l: &[f64; 4]) -> BasisEval {
        eval_reference(self.degree, l, &self.grad_lambda[k])
    }

    /// Local basis values and gradients at a physical point of tet `k`.
    pub fn eval_basis(&self, k: usize, x: &Point) -> Result<BasisEval> {
        let l = barycentric(&self.tet_points[k], x);
        if l.iter().any(|&c| !(-1e-10..=1.0 + 1e-10).contains(&c)) {
            return Err(Error::Usage(format!(
                "point {x:?} lies outside band tet {k}"
            )));
        }
        Ok(self.eval_bary(k, &l))
    }
}

/// Builds the P1 or P2 space on the band; `components` is 1 or 3.
pub fn build_space(band: &ActiveBand, degree: usize, components: usize) -> Result<DiscreteSpace> {
    if !(degree == 1 || degree == 2) {
        return Err(Error::Config(format!(
            "unsupported polynomial degree {degree}"
        )));
    }
    if !(components == 1 || components == 3) {
        return Err(Error::Config(format!(
            "unsupported component count {components}"
        )));
    }
    let mesh = &band.mesh;
    // nodes keyed by sorted vertex pairs; a vertex is the pair (v, v)
    let local_keys = |t: usize| -> Vec<(usize, usize)> {
        let v = mesh.tets[t];
        let mut keys: Vec<(usize, usize)> = v.iter().map(|&a| (a, a)).collect();
        if degree == 2 {
            keys.extend(EDGES.iter().map(|&(i, j)| (v[i].min(v[j]), v[i].max(v[j]))));
        }
        keys
    };
    let mut all: Vec<(usize, usize)> = band.cut_tets.iter().flat_map(|&t| local_keys(t)).collect();
    all.sort_unstable();
    all.dedup();
    let dof_map = band
        .cut_tets
        .iter()
        .flat_map(|&t| local_keys(t))
        .map(|key| all.binary_search(&key).expect("key collected above"))
        .collect();
    let node_coords = all
        .iter()
        .map(|&(a, b)| {
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            [0, 1, 2].map(|c| 0.5 * (pa[c] + pb[c]))
        })
        .collect();
    let tet_points: Vec<[Point; 4]> = (0..band.len()).map(|k| band.tet_points(k)).collect();
    let grad_lambda = tet_points.iter().map(barycentric_gradients).collect();
    Ok(DiscreteSpace {
        degree,
        components,
        node_count: all.len(),
        dof_map,
        node_coords,
        tet_points,
        grad_lambda,
    })
}

/// Coefficient vector over a space.
#[derive(Debug, Clone)]
pub struct FEFunction<'a> {
    pub space: &'a DiscreteSpace,
    pub coeffs: Vec<f64>,
}

impl<'a> FEFunction<'a> {
    pub fn new(space: &'a DiscreteSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dof_count() {
            return Err(Error::Usage(format!(
                "coefficient vector has length {} but the space has {} unknowns",
                coeffs.len(),
                space.dof_count()
            )));
        }
        Ok(FEFunction { space, coeffs })
    }

    pub fn zeros(space: &'a DiscreteSpace) -> Self {
        FEFunction {
            space,
            coeffs: vec![0.0; space.dof_count()],
        }
    }

    /// Value of component `c` and its gradient at barycentric `l` of tet `k`.
    pub fn eval_component(&self, k: usize, l: &[f64; 4], c: usize) -> (f64, [f64; 3]) {
        let b = self.space.eval_bary(k, l);
        let nodes = self.space.local_nodes(k);
        let nc = self.space.components;
        let mut v = 0.0;
        let mut g = [0.0; 3];
        for i in 0..b.n {
            let a = self.coeffs[nodes[i] * nc + c];
            v += a * b.values[i];
            for d in 0..3 {
                g[d] += a * b.grads[i][d];
            }
        }
        (v, g)
    }

    /// Vector value and Jacobian `J[c][d] = ∂u_c/∂x_d` (three components).
    pub fn eval_vector(&self, k: usize, l: &[f64; 4]) -> ([f64; 3], [[f64; 3]; 3]) {
        let b = self.space.eval_bary(k, l);
        let nodes = self.space.local_nodes(k);
        let mut v = [0.0; 3];
        let mut j = [[0.0; 3]; 3];
        for i in 0..b.n {
            for c in 0..3 {
                let a = self.coeffs[nodes[i] * 3 + c];
                v[c] += a * b.values[i];
                for d in 0..3 {
                    j[c][d] += a * b.grads[i][d];
                }
            }
        }
        (v, j)
    }
}

/// Nodal interpolant of a scalar function (one component).
pub fn interpolate<'a, F: Fn(&Point) -> f64>(space: &'a DiscreteSpace, f: F) -> FEFunction<'a> {
    let mut coeffs = vec![0.0; space.dof_count()];
    for (n, x) in space.node_coords.iter().enumerate() {
        let v = f(x);
        for c in 0..space.components {
            coeffs[n * space.components + c] = v;
        }
    }
    FEFunction { space, coeffs }
}

/// Nodal interpolant of a vector field into a three-component space.
pub fn interpolate_vector<'a, F: Fn(&Point) -> [f64; 3]>(
    space: &'a DiscreteSpace,
    f: F,
) -> Result<FEFunction<'a>> {
    if space.components != 3 {
        return Err(Error::Usage(
            "vector interpolation needs a three-component space".into(),
        ));
    }
    let mut coeffs = vec![0.0; space.dof_count()];
    for (n, x) in space.node_coords.iter().enumerate() {
        coeffs[n * 3..n * 3 + 3].copy_from_slice(&f(x));
    }
    Ok(FEFunction { space, coeffs })
}
