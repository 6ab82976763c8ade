//! Piecewise-planar surface reconstruction by marching tetrahedra.
//!
//! Each cut tet is split into `m³` sub-tets (the Freudenthal refinement of
//! its barycentric lattice); the zero set of the linear interpolant of φ on
//! every sub-tet gives a triangle or a planar quad. With `m = 1` this is
//! `Γ_h`, and with `m > 1` it is the finer `Γ_{h/m}` used for integration.

use std::io::Write;
use std::path::Path;

use log::warn;

use super::levelset::{eval_frame, LevelSet, SurfaceFrame};
use super::quadrature::{tet_degree5, triangle_degree4};
use std::sync::Arc;

use crate::mesh::{cross, norm, sub, validated_band, ActiveBand, BackgroundMesh, Point};
use crate::par::{self, ExecMode};
use crate::{Error, Result};

/// Identity of a reconstructed vertex: the (sorted) pair of lattice points
/// whose edge it lies on. With `m = 1` lattice points are global vertex ids.
pub type EdgeKey = [u64; 2];

/// Surface patch inside one cut tet.
#[derive(Debug, Clone, Default)]
pub struct TetPatch {
    pub triangles: Vec<[Point; 3]>,
    pub keys: Vec<[EdgeKey; 3]>,
}

impl TetPatch {
    pub fn area(&self) -> f64 {
        self.triangles.iter().map(triangle_area).sum()
    }
}

#[derive(Debug, Clone)]
pub struct CutSurface {
    pub level_set: LevelSet,
    /// Subdivision factor `m`.
    pub subdivision: usize,
    /// One patch per band position.
    pub patches: Vec<TetPatch>,
    /// Triangles discarded as numerically degenerate.
    pub dropped: usize,
}

pub fn triangle_area(t: &[Point; 3]) -> f64 {
    0.5 * norm(&cross(&sub(&t[1], &t[0]), &sub(&t[2], &t[0])))
}

/// A surface quadrature point with its exact frame.
#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint {
    pub x: Point,
    pub weight: f64,
    /// Barycentric coordinates with respect to the containing cut tet.
    pub bary: [f64; 4],
    pub frame: SurfaceFrame,
}

/// Default subdivision `m = ⌈1/h⌉`.
pub fn default_subdivision(h: f64) -> usize {
    (1.0 / h).ceil().max(1.0) as usize
}

/// Lattice points `(x, y, z)` with `m ≥ x ≥ y ≥ z ≥ 0` map to barycentric
/// coordinates `(1 − x, x − y, y − z, z)/m`.
fn lattice_bary(p: [usize; 3], m: usize) -> [f64; 4] {
    let mf = m as f64;
    [
        (m - p[0]) as f64 / mf,
        (p[0] - p[1]) as f64 / mf,
        (p[1] - p[2]) as f64 / mf,
        p[2] as f64 / mf,
    ]
}

/// The `m³` sub-tets of the Freudenthal refinement, as lattice points.
pub fn sub_tets(m: usize) -> Vec<[[usize; 3]; 4]> {
    let kuhn = crate::mesh::kuhn_tets();
    let inside = |p: &[usize; 3]| p[0] <= m && p[0] >= p[1] && p[1] >= p[2];
    let mut out = Vec::with_capacity(m * m * m);
    for i in 0..m {
        for j in 0..=i {
            for k in 0..=j {
                for t in &kuhn {
                    let v = t.map(|c| [i + c[0] as usize, j + c[1] as usize, k + c[2] as usize]);
                    if v.iter().all(inside) {
                        out.push(v);
                    }
                }
            }
        }
    }
    out
}

/// Point of `a`–`b` where the linear interpolant vanishes, computed in a
/// canonical endpoint order so shared edges give bit-identical results.
fn edge_root(ka: u64, pa: &Point, va: f64, kb: u64, pb: &Point, vb: f64) -> (Point, EdgeKey) {
    let ((ka, pa, va), (kb, pb, vb)) = if ka <= kb {
        ((ka, pa, va), (kb, pb, vb))
    } else {
        ((kb, pb, vb), (ka, pa, va))
    };
    let t = va / (va - vb);
    let x = [
        pa[0] + t * (pb[0] - pa[0]),
        pa[1] + t * (pb[1] - pa[1]),
        pa[2] + t * (pb[2] - pa[2]),
    ];
    (x, [ka, kb])
}

/// Zero set of the linear interpolant on one tetrahedron. Vertex values of
/// exactly zero count on the nonpositive side.
pub fn march_tet(
    points: &[Point; 4],
    values: &[f64; 4],
    keys: &[u64; 4],
) -> Vec<([Point; 3], [EdgeKey; 3])> {
    let neg: Vec<usize> = (0..4).filter(|&i| values[i] <= 0.0).collect();
    let pos: Vec<usize> = (0..4).filter(|&i| values[i] > 0.0).collect();
    let root = |i: usize, j: usize| {
        edge_root(
            keys[i], &points[i], values[i], keys[j], &points[j], values[j],
        )
    };
    let mut out = Vec::new();
    match (neg.len(), pos.len()) {
        (1, 3) | (3, 1) => {
            let (lone, others) = if neg.len() == 1 {
                (neg[0], &pos)
            } else {
                (pos[0], &neg)
            };
            let r: Vec<(Point, EdgeKey)> = others.iter().map(|&o| root(lone, o)).collect();
            out.push(orient([r[0], r[1], r[2]], points, values));
        }
        (2, 2) => {
            let (a, b) = (neg[0], neg[1]);
            let (c, d) = (pos[0], pos[1]);
            // cyclic order around the planar quad
            let q = [root(a, c), root(a, d), root(b, d), root(b, c)];
            let d02 = norm(&sub(&q[0].0, &q[2].0));
            let d13 = norm(&sub(&q[1].0, &q[3].0));
            if d02 <= d13 {
                out.push(orient([q[0], q[1], q[2]], points, values));
                out.push(orient([q[0], q[2], q[3]], points, values));
            } else {
                out.push(orient([q[0], q[1], q[3]], points, values));
                out.push(orient([q[1], q[2], q[3]], points, values));
            }
        }
        _ => {}
    }
    out
}

/// Orders the triangle so its normal points toward increasing φ.
fn orient(
    tri: [(Point, EdgeKey); 3],
    points: &[Point; 4],
    values: &[f64; 4],
) -> ([Point; 3], [EdgeKey; 3]) {
    let nrm = cross(&sub(&tri[1].0, &tri[0].0), &sub(&tri[2].0, &tri[0].0));
    // gradient direction of the linear interpolant, up to a positive factor
    let e = [
        sub(&points[1], &points[0]),
        sub(&points[2], &points[0]),
        sub(&points[3], &points[0]),
    ];
    let dv = [
        values[1] - values[0],
        values[2] - values[0],
        values[3] - values[0],
    ];
    let c = [
        cross(&e[1], &e[2]),
        cross(&e[2], &e[0]),
        cross(&e[0], &e[1]),
    ];
    let det = crate::mesh::dot(&e[0], &c[0]);
    let grad = [0, 1, 2].map(|k| (dv[0] * c[0][k] + dv[1] * c[1][k] + dv[2] * c[2][k]) / det);
    if crate::mesh::dot(&nrm, &grad) < 0.0 {
        (
            [tri[0].0, tri[2].0, tri[1].0],
            [tri[0].1, tri[2].1, tri[1].1],
        )
    } else {
        (
            [tri[0].0, tri[1].0, tri[2].0],
            [tri[0].1, tri[1].1, tri[2].1],
        )
    }
}

/// Active band for the integration surface `Γ_{h/m}`: every finest-level tet
/// on which the interpolant of φ over its `m`-fold sub-lattice is not of one
/// strict sign. For `m = 1` this is the usual band; for larger `m` it also
/// picks up tets that the exact surface crosses without a vertex sign change,
/// so that `Γ_{h/m}` is covered completely.
pub fn extract_band_for_subdivision(
    mesh: Arc<BackgroundMesh>,
    phi: &LevelSet,
    m: usize,
) -> Result<ActiveBand> {
    if m == 0 {
        return Err(Error::Config(
            "subdivision factor must be at least 1".into(),
        ));
    }
    let values: Vec<f64> = mesh.vertices.iter().map(|x| phi.value(x)).collect();
    let lattice: Vec<[f64; 4]> = (0..=m)
        .flat_map(|i| (0..=i).flat_map(move |j| (0..=j).map(move |k| lattice_bary([i, j, k], m))))
        .collect();
    let flags = par::map_indexed(ExecMode::default(), mesh.tets.len(), |t| {
        let vids = mesh.tets[t];
        let v = vids.map(|i| values[i]);
        let strict = |vals: &mut dyn Iterator<Item = f64>| {
            let (mut pos, mut neg) = (true, true);
            for x in vals {
                pos &= x > 0.0;
                neg &= x < 0.0;
            }
            pos || neg
        };
        if !strict(&mut v.iter().copied()) {
            return true;
        }
        if m == 1 || mesh.tet_level[t] != mesh.level {
            return false;
        }
        let tet = mesh.tet_points(t);
        let diam = mesh.tet_diameter(t);
        // far from the surface the sub-lattice cannot change sign
        let far = (0..4).any(|i| {
            let g = phi.gradient(&tet[i]);
            v[i].abs() > 2.0 * diam * norm(&g)
        });
        if far {
            return false;
        }
        let mut sub_values = lattice.iter().map(|l| {
            let x = [0, 1, 2]
                .map(|c| l[0] * tet[0][c] + l[1] * tet[1][c] + l[2] * tet[2][c] + l[3] * tet[3][c]);
            phi.value(&x)
        });
        !strict(&mut sub_values)
    });
    let cut_tets = (0..mesh.tets.len()).filter(|&t| flags[t]).collect();
    validated_band(mesh, cut_tets, &values)
}

/// Extracts `Γ_{h/m}` on every band tet.
pub fn extract_cut_surface(band: &ActiveBand, phi: &LevelSet, m: usize) -> Result<CutSurface> {
    extract_cut_surface_with(band, phi, m, ExecMode::default())
}

pub fn extract_cut_surface_with(
    band: &ActiveBand,
    phi: &LevelSet,
    m: usize,
    mode: ExecMode,
) -> Result<CutSurface> {
    if m == 0 {
        return Err(Error::Config(
            "subdivision factor must be at least 1".into(),
        ));
    }
    let subs = sub_tets(m);
    let stride = (m + 1) as u64;
    let results = par::map_indexed(mode, band.len(), |k| {
        let tet = band.tet_points(k);
        let global = band.mesh.tets[band.cut_tets[k]];
        let h_t = band.mesh.tet_diameter(band.cut_tets[k]);
        let lattice_key = |p: [usize; 3]| -> u64 {
            if m == 1 {
                // Kuhn lattice corners are the tet vertices in order
                let vid = match p {
                    [0, 0, 0] => 0,
                    [1, 0, 0] => 1,
                    [1, 1, 0] => 2,
                    _ => 3,
                };
                global[vid] as u64
            } else {
                (p[0] as u64 * stride + p[1] as u64) * stride + p[2] as u64
            }
        };
        let mut cache = vec![f64::NAN; (m + 1).pow(3)];
        let mut point_cache = vec![[0.0; 3]; (m + 1).pow(3)];
        let mut at = |p: [usize; 3]| -> (Point, f64) {
            let i = (p[0] * (m + 1) + p[1]) * (m + 1) + p[2];
            if cache[i].is_nan() {
                let l = lattice_bary(p, m);
                let x = [0, 1, 2].map(|c| {
                    l[0] * tet[0][c] + l[1] * tet[1][c] + l[2] * tet[2][c] + l[3] * tet[3][c]
                });
                let x = if m == 1 {
                    tet[match p {
                        [0, 0, 0] => 0,
                        [1, 0, 0] => 1,
                        [1, 1, 0] => 2,
                        _ => 3,
                    }]
                } else {
                    x
                };
                point_cache[i] = x;
                cache[i] = phi.value(&x);
            }
            (point_cache[i], cache[i])
        };
        let mut patch = TetPatch::default();
        let mut dropped = 0usize;
        for st in &subs {
            let pv: [(Point, f64); 4] = std::array::from_fn(|i| at(st[i]));
            let values = pv.map(|(_, v)| v);
            if values.iter().all(|&v| v > 0.0) || values.iter().all(|&v| v <= 0.0) {
                continue;
            }
            let points = pv.map(|(x, _)| x);
            let keys = st.map(lattice_key);
            for (tri, key) in march_tet(&points, &values, &keys) {
                if triangle_area(&tri) < 1e-14 * h_t * h_t {
                    dropped += 1;
                    continue;
                }
                patch.triangles.push(tri);
                patch.keys.push(key);
            }
        }
        (patch, dropped)
    });
    let dropped = results.iter().map(|r| r.1).sum();
    if dropped > 0 {
        warn!("dropped {dropped} degenerate surface triangles");
    }
    Ok(CutSurface {
        level_set: phi.clone(),
        subdivision: m,
        patches: results.into_iter().map(|r| r.0).collect(),
        dropped,
    })
}

/// Barycentric coordinates of `x` with respect to `tet`.
pub fn barycentric(tet: &[Point; 4], x: &Point) -> [f64; 4] {
    let e = [
        sub(&tet[1], &tet[0]),
        sub(&tet[2], &tet[0]),
        sub(&tet[3], &tet[0]),
    ];
    let r = sub(x, &tet[0]);
    let det = crate::mesh::dot(&e[0], &cross(&e[1], &e[2]));
    let l1 = crate::mesh::dot(&r, &cross(&e[1], &e[2])) / det;
    let l2 = crate::mesh::dot(&e[0], &cross(&r, &e[2])) / det;
    let l3 = crate::mesh::dot(&e[0], &cross(&e[1], &r)) / det;
    [1.0 - l1 - l2 - l3, l1, l2, l3]
}

impl CutSurface {
    pub fn triangle_count(&self) -> usize {
        self.patches.iter().map(|p| p.triangles.len()).sum()
    }

    pub fn area(&self) -> f64 {
        self.patches.iter().map(TetPatch::area).sum()
    }

    /// Visits the degree-4 quadrature points of patch `k`, with exact frames.
    pub fn for_each_point<F>(&self, band: &ActiveBand, k: usize, mut f: F) -> Result<()>
    where
        F: FnMut(&SurfacePoint),
    {
        let tet = band.tet_points(k);
        for tri in &self.patches[k].triangles {
            let area = triangle_area(tri);
            for (l, w) in triangle_degree4() {
                let x = [0, 1, 2].map(|c| l[0] * tri[0][c] + l[1] * tri[1][c] + l[2] * tri[2][c]);
                let frame = eval_frame(&self.level_set, &x)?;
                f(&SurfacePoint {
                    x,
                    weight: w * area,
                    bary: barycentric(&tet, &x),
                    frame,
                });
            }
        }
        Ok(())
    }

    /// `Σ w f(x)` over all surface quadrature points.
    pub fn integrate<F>(&self, band: &ActiveBand, f: F) -> Result<f64>
    where
        F: Fn(&SurfacePoint) -> f64,
    {
        let mut total = 0.0;
        for k in 0..self.patches.len() {
            self.for_each_point(band, k, |q| total += q.weight * f(q))?;
        }
        Ok(total)
    }

    /// Triangle soup dump: one `x1 y1 z1 x2 y2 z2 x3 y3 z3` line per triangle.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for patch in &self.patches {
            for t in &patch.triangles {
                writeln!(
                    w,
                    "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                    t[0][0], t[0][1], t[0][2], t[1][0], t[1][1], t[1][2], t[2][0], t[2][1], t[2][2]
                )?;
            }
        }
        Ok(())
    }

    pub fn dump_to_file(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_dump(f)?;
        Ok(())
    }
}

/// Volume quadrature over the whole band tets (Ω_h^Γ).
#[derive(Debug, Clone, Copy, Default)]
pub struct BandQuadrature;

impl BandQuadrature {
    /// Visits `(x, weight, barycentric)` for band tet `k`.
    pub fn for_each_point<F>(&self, band: &ActiveBand, k: usize, mut f: F)
    where
        F: FnMut(&Point, f64, &[f64; 4]),
    {
        let tet = band.tet_points(k);
        let vol = crate::mesh::signed_volume(&tet);
        for (l, w) in tet_degree5() {
            let x = [0, 1, 2]
                .map(|c| l[0] * tet[0][c] + l[1] * tet[1][c] + l[2] * tet[2][c] + l[3] * tet[3][c]);
            f(&x, w * vol, l);
        }
    }
}
