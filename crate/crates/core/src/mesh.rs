//! Background tetrahedral mesh of Ω = (−5/3, 5/3)³ and the active cut band.
//!
//! The box is split into 2³ root cubes. Cubes near the zero level of the
//! level set are refined octree-style down to the requested level and every
//! leaf cube is cut into six Kuhn tetrahedra sharing the main diagonal. Kuhn
//! triangulations of dyadic cube grids are conforming on shared faces and
//! nested under refinement, which the tests check directly.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::geometry::LevelSet;
use crate::{Error, Result};

/// Half-width of the computational box.
pub const DOMAIN_HALF_WIDTH: f64 = 5.0 / 3.0;
/// Largest refinement level accepted by [`build_mesh`].
pub const MAX_LEVEL: u32 = 8;

pub type Point = [f64; 3];

/// Characteristic mesh size `h_ℓ = (5/3)·2^(−ℓ)`.
pub fn mesh_size(level: u32) -> f64 {
    DOMAIN_HALF_WIDTH * 0.5f64.powi(level as i32)
}

/// Corner offsets of the six Kuhn tetrahedra of the unit cube: walk from
/// (0,0,0) to (1,1,1) along the axes in every order.
const KUHN_AXIS_ORDERS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Lattice vertices of the Kuhn tetrahedra of a unit cube, positively oriented.
pub fn kuhn_tets() -> [[[u32; 3]; 4]; 6] {
    let mut out = [[[0u32; 3]; 4]; 6];
    for (t, order) in KUHN_AXIS_ORDERS.iter().enumerate() {
        let mut corner = [0u32; 3];
        out[t][0] = corner;
        for (step, &axis) in order.iter().enumerate() {
            corner[axis] = 1;
            out[t][step + 1] = corner;
        }
        let p: [Point; 4] = std::array::from_fn(|i| out[t][i].map(f64::from));
        if signed_volume(&p) < 0.0 {
            out[t].swap(2, 3);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct CubeKey {
    level: u32,
    idx: [u32; 3],
}

impl CubeKey {
    fn side(&self) -> f64 {
        mesh_size(self.level)
    }

    fn origin(&self) -> Point {
        let s = self.side();
        self.idx.map(|i| -DOMAIN_HALF_WIDTH + f64::from(i) * s)
    }

    fn center(&self) -> Point {
        let o = self.origin();
        let s = 0.5 * self.side();
        [o[0] + s, o[1] + s, o[2] + s]
    }

    fn children(&self) -> impl Iterator<Item = CubeKey> + '_ {
        (0..8u32).map(move |c| CubeKey {
            level: self.level + 1,
            idx: [
                2 * self.idx[0] + (c & 1),
                2 * self.idx[1] + ((c >> 1) & 1),
                2 * self.idx[2] + ((c >> 2) & 1),
            ],
        })
    }

    /// The up-to-26 same-level neighbors inside the box.
    fn neighbors(&self) -> Vec<CubeKey> {
        let n = 2u32 << self.level;
        let mut out = Vec::with_capacity(26);
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let idx = [
                        i64::from(self.idx[0]) + dx,
                        i64::from(self.idx[1]) + dy,
                        i64::from(self.idx[2]) + dz,
                    ];
                    if idx.iter().all(|&i| i >= 0 && i < i64::from(n)) {
                        out.push(CubeKey {
                            level: self.level,
                            idx: idx.map(|i| i as u32),
                        });
                    }
                }
            }
        }
        out
    }
}

/// Background tetrahedral mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundMesh {
    pub vertices: Vec<Point>,
    pub tets: Vec<[usize; 4]>,
    /// Refinement level of the cube each tet came from.
    pub tet_level: Vec<u32>,
    pub level: u32,
    pub h: f64,
    /// Integer coordinates of each vertex on the finest lattice (spacing `h`).
    lattice: Vec<[u32; 3]>,
}

/// Builds the background mesh at `level`, refined toward the zero set of
/// `phi` when given and uniform otherwise.
pub fn build_mesh(level: u32, phi: Option<&LevelSet>) -> Result<BackgroundMesh> {
    if level > MAX_LEVEL {
        return Err(Error::Config(format!(
            "refinement level {level} exceeds {MAX_LEVEL}"
        )));
    }
    let mut internal: BTreeSet<CubeKey> = BTreeSet::new();
    let mut leaves: Vec<CubeKey> = Vec::new();
    let mut current: Vec<CubeKey> = (0..8u32)
        .map(|c| CubeKey {
            level: 0,
            idx: [c & 1, (c >> 1) & 1, (c >> 2) & 1],
        })
        .collect();
    for _ in 0..level {
        let refine: Vec<bool> = match phi {
            None => vec![true; current.len()],
            Some(phi) => {
                let mut near_cache: BTreeMap<CubeKey, bool> = BTreeMap::new();
                let mut is_near = |k: CubeKey| {
                    *near_cache
                        .entry(k)
                        .or_insert_with(|| cube_near_surface(&k, phi))
                };
                current
                    .iter()
                    .map(|c| is_near(*c) || c.neighbors().into_iter().any(&mut is_near))
                    .collect()
            }
        };
        let mut next = Vec::new();
        for (c, r) in current.iter().zip(refine) {
            if r {
                internal.insert(*c);
                next.extend(c.children());
            } else {
                leaves.push(*c);
            }
        }
        current = next;
    }
    leaves.extend(current);
    balance_two_to_one(&mut leaves, &mut internal, level);
    leaves.sort();
    Ok(tetrahedralize(&leaves, level))
}

/// Conservative proximity test: estimated distance from the cube center to
/// the zero set below the cube diagonal, or a sign change over the corners.
fn cube_near_surface(cube: &CubeKey, phi: &LevelSet) -> bool {
    let c = cube.center();
    let diag = cube.side() * 3f64.sqrt();
    let v = phi.value(&c);
    let g = phi.gradient(&c);
    let gn = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    if v.abs() < diag * gn.max(1e-300) {
        return true;
    }
    let o = cube.origin();
    let s = cube.side();
    let mut pos = false;
    let mut neg = false;
    for corner in 0..8u32 {
        let p = [
            o[0] + s * f64::from(corner & 1),
            o[1] + s * f64::from((corner >> 1) & 1),
            o[2] + s * f64::from((corner >> 2) & 1),
        ];
        let val = phi.value(&p);
        pos |= val >= 0.0;
        neg |= val <= 0.0;
    }
    pos && neg
}

/// Enforces that face/edge/vertex-adjacent leaves differ by at most one level.
fn balance_two_to_one(leaves: &mut Vec<CubeKey>, internal: &mut BTreeSet<CubeKey>, max_level: u32) {
    loop {
        let mut split = Vec::new();
        for (pos, leaf) in leaves.iter().enumerate() {
            if leaf.level + 2 > max_level {
                continue;
            }
            let too_fine = leaf
                .neighbors()
                .iter()
                .any(|nb| internal.contains(nb) && nb.children().any(|ch| internal.contains(&ch)));
            if too_fine {
                split.push(pos);
            }
        }
        if split.is_empty() {
            return;
        }
        let mut keep = Vec::with_capacity(leaves.len() + 7 * split.len());
        let mut s = split.iter().peekable();
        for (pos, leaf) in leaves.iter().enumerate() {
            if s.peek() == Some(&&pos) {
                s.next();
                internal.insert(*leaf);
                keep.extend(leaf.children());
            } else {
                keep.push(*leaf);
            }
        }
        *leaves = keep;
    }
}

fn tetrahedralize(leaves: &[CubeKey], level: u32) -> BackgroundMesh {
    let kuhn = kuhn_tets();
    let mut tet_lattice: Vec<[[u32; 3]; 4]> = Vec::with_capacity(6 * leaves.len());
    let mut tet_level = Vec::with_capacity(6 * leaves.len());
    for leaf in leaves {
        let scale = 1u32 << (level - leaf.level);
        let base = leaf.idx.map(|i| i * scale);
        for t in &kuhn {
            tet_lattice.push(t.map(|c| {
                [
                    base[0] + c[0] * scale,
                    base[1] + c[1] * scale,
                    base[2] + c[2] * scale,
                ]
            }));
            tet_level.push(leaf.level);
        }
    }
    let mut lattice: Vec<[u32; 3]> = tet_lattice.iter().flatten().copied().collect();
    lattice.sort_unstable_by_key(|p| (p[2], p[1], p[0]));
    lattice.dedup();
    let h = mesh_size(level);
    let vertices = lattice
        .iter()
        .map(|p| p.map(|i| -DOMAIN_HALF_WIDTH + f64::from(i) * h))
        .collect();
    let tets = tet_lattice
        .iter()
        .map(|t| {
            t.map(|p| {
                lattice
                    .binary_search_by_key(&(p[2], p[1], p[0]), |q| (q[2], q[1], q[0]))
                    .expect("vertex")
            })
        })
        .collect();
    BackgroundMesh {
        vertices,
        tets,
        tet_level,
        level,
        h,
        lattice,
    }
}

pub fn signed_volume(p: &[Point; 4]) -> f64 {
    let a = sub(&p[1], &p[0]);
    let b = sub(&p[2], &p[0]);
    let c = sub(&p[3], &p[0]);
    dot(&a, &cross(&b, &c)) / 6.0
}

#[inline]
pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

impl BackgroundMesh {
    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        signed_volume(&self.tet_points(t))
    }

    /// Diameter (longest edge) of tet `t`.
    pub fn tet_diameter(&self, t: usize) -> f64 {
        let p = self.tet_points(t);
        let mut d: f64 = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                d = d.max(norm(&sub(&p[i], &p[j])));
            }
        }
        d
    }

    /// Lattice coordinates of vertex `v` on the finest grid.
    pub fn lattice_coords(&self, v: usize) -> [u32; 3] {
        self.lattice[v]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let n = 2u32 << self.level;
        self.lattice[v].iter().any(|&i| i == 0 || i == n)
    }

    /// Circumradius over inradius of tet `t`.
    pub fn shape_ratio(&self, t: usize) -> f64 {
        let p = self.tet_points(t);
        let vol = signed_volume(&p).abs();
        let faces = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
        let area: f64 = faces
            .iter()
            .map(|f| 0.5 * norm(&cross(&sub(&p[f[1]], &p[f[0]]), &sub(&p[f[2]], &p[f[0]]))))
            .sum();
        let inradius = 3.0 * vol / area;
        // circumcenter solves 2(p_i − p_0)·c = |p_i|² − |p_0|²
        let a = [sub(&p[1], &p[0]), sub(&p[2], &p[0]), sub(&p[3], &p[0])];
        let rhs = [
            dot(&a[0], &a[0]) / 2.0,
            dot(&a[1], &a[1]) / 2.0,
            dot(&a[2], &a[2]) / 2.0,
        ];
        let det = dot(&a[0], &cross(&a[1], &a[2]));
        let c = {
            let c12 = cross(&a[1], &a[2]);
            let c20 = cross(&a[2], &a[0]);
            let c01 = cross(&a[0], &a[1]);
            [0, 1, 2].map(|k| (rhs[0] * c12[k] + rhs[1] * c20[k] + rhs[2] * c01[k]) / det)
        };
        norm(&c) / inradius
    }

    /// Writes the plain-text mesh dump: a header line
    /// `tets N vertices M level L`, then `M` vertex lines `x y z`, then `N`
    /// connectivity lines `v0 v1 v2 v3` (zero-based).
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "tets {} vertices {} level {}",
            self.tets.len(),
            self.vertices.len(),
            self.level
        )?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
        }
        for t in &self.tets {
            writeln!(w, "{} {} {} {}", t[0], t[1], t[2], t[3])?;
        }
        Ok(())
    }

    pub fn dump_to_file(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_dump(f)?;
        Ok(())
    }
}

/// The cut tetrahedra `T_h^Γ` together with their vertex-neighborhoods.
#[derive(Debug, Clone)]
pub struct ActiveBand {
    pub mesh: Arc<BackgroundMesh>,
    /// Indices into `mesh.tets`, ascending.
    pub cut_tets: Vec<usize>,
    /// For band position `k`, the band positions of tets sharing at least a
    /// vertex with `cut_tets[k]` (including `k` itself).
    pub neighbor_map: Vec<Vec<usize>>,
}

/// Collects every tet on which the vertex values of the P1 interpolant of
/// `phi` are not all of one strict sign.
pub fn extract_active_band(mesh: Arc<BackgroundMesh>, phi: &LevelSet) -> Result<ActiveBand> {
    let values: Vec<f64> = mesh.vertices.iter().map(|x| phi.value(x)).collect();
    let cut_tets: Vec<usize> = (0..mesh.tets.len())
        .filter(|&t| {
            let v = mesh.tets[t].map(|i| values[i]);
            let all_pos = v.iter().all(|&x| x > 0.0);
            let all_neg = v.iter().all(|&x| x < 0.0);
            !(all_pos || all_neg)
        })
        .collect();
    validated_band(mesh, cut_tets, &values)
}

/// Applies the band checks to an explicit list of cut tets; `values` holds
/// φ at every mesh vertex.
pub fn validated_band(
    mesh: Arc<BackgroundMesh>,
    cut_tets: Vec<usize>,
    values: &[f64],
) -> Result<ActiveBand> {
    if cut_tets.is_empty() {
        return Err(Error::Geometry(
            "the level set does not cut any tetrahedron".into(),
        ));
    }
    for &t in &cut_tets {
        // the surfaces are closed with φ > 0 outside, so φ ≤ 0 on ∂Ω means Γ_h touches it
        if mesh.tets[t]
            .iter()
            .any(|&v| mesh.is_boundary_vertex(v) && values[v] <= 0.0)
        {
            return Err(Error::Geometry(
                "the zero level set reaches the boundary of the box".into(),
            ));
        }
        if mesh.tet_level[t] != mesh.level {
            return Err(Error::Geometry(format!(
                "cut tetrahedron {t} is at refinement level {} instead of {}",
                mesh.tet_level[t], mesh.level
            )));
        }
    }
    ActiveBand::from_tets(mesh, cut_tets)
}

impl ActiveBand {
    /// Band over an explicit tet list (used for synthetic test bands).
    pub fn from_tets(mesh: Arc<BackgroundMesh>, mut cut_tets: Vec<usize>) -> Result<Self> {
        cut_tets.sort_unstable();
        cut_tets.dedup();
        if cut_tets.is_empty() {
            return Err(Error::Geometry("empty active band".into()));
        }
        let mut by_vertex: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, &t) in cut_tets.iter().enumerate() {
            for &v in &mesh.tets[t] {
                by_vertex.entry(v).or_default().push(k);
            }
        }
        let neighbor_map = cut_tets
            .iter()
            .map(|&t| {
                let mut nb: Vec<usize> = mesh.tets[t]
                    .iter()
                    .flat_map(|v| by_vertex[v].iter().copied())
                    .collect();
                nb.sort_unstable();
                nb.dedup();
                nb
            })
            .collect();
        Ok(ActiveBand {
            mesh,
            cut_tets,
            neighbor_map,
        })
    }

    pub fn len(&self) -> usize {
        self.cut_tets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cut_tets.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.mesh.h
    }

    pub fn tet_points(&self, k: usize) -> [Point; 4] {
        self.mesh.tet_points(self.cut_tets[k])
    }

    /// Total volume of Ω_h^Γ.
    pub fn volume(&self) -> f64 {
        self.cut_tets.iter().map(|&t| self.mesh.tet_volume(t)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_zero_has_48_tets() {
        let m = build_mesh(0, None).unwrap();
        assert_eq!(m.tets.len(), 48);
        assert_eq!(m.vertices.len(), 27);
        assert!((m.h - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_level_one_has_384_tets() {
        let m = build_mesh(1, None).unwrap();
        assert_eq!(m.tets.len(), 384);
        assert!((mesh_size(2) - 0.4166666666666667).abs() < 1e-15);
    }

    #[test]
    fn level_guard() {
        assert!(matches!(build_mesh(9, None), Err(Error::Config(_))));
    }

    #[test]
    fn kuhn_tets_fill_the_cube() {
        let vol: f64 = kuhn_tets()
            .iter()
            .map(|t| signed_volume(&t.map(|c| c.map(f64::from))))
            .inspect(|&v| assert!(v > 0.0))
            .sum();
        assert!((vol - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_volume_orientation_and_shape() {
        for level in 0..=2 {
            let m = build_mesh(level, None).unwrap();
            let total: f64 = (0..m.tets.len()).map(|t| m.tet_volume(t)).sum();
            let exact = (10.0f64 / 3.0).powi(3);
            assert!(((total - exact) / exact).abs() < 1e-12);
            for t in 0..m.tets.len() {
                assert!(m.tet_volume(t) > 0.0);
                assert!(m.shape_ratio(t) <= 50.0);
            }
        }
    }

    #[test]
    fn adapted_mesh_tiles_the_box() {
        let phi = LevelSet::sphere();
        let m = build_mesh(4, Some(&phi)).unwrap();
        // compensated sum; plain accumulation over ~10⁵ tets loses ~1e-12
        let (mut total, mut comp) = (0.0f64, 0.0f64);
        for t in 0..m.tets.len() {
            let v = m.tet_volume(t);
            let s = total + v;
            comp += if total.abs() >= v.abs() {
                (total - s) + v
            } else {
                (v - s) + total
            };
            total = s;
        }
        let total = total + comp;
        let exact = (10.0f64 / 3.0).powi(3);
        assert!(
            ((total - exact) / exact).abs() < 1e-12,
            "{}",
            (total - exact) / exact
        );
        assert!(m.tets.len() < 48 * 8usize.pow(4));
        assert!(m.tet_level.iter().any(|&l| l < 4));
    }

    #[test]
    fn band_is_symmetric_and_signs_change() {
        let phi = LevelSet::sphere();
        let mesh = Arc::new(build_mesh(2, Some(&phi)).unwrap());
        let band = extract_active_band(mesh.clone(), &phi).unwrap();
        for (k, nb) in band.neighbor_map.iter().enumerate() {
            assert!(nb.contains(&k));
            for &j in nb {
                assert!(band.neighbor_map[j].contains(&k));
            }
        }
        for k in 0..band.len() {
            let r: Vec<f64> = band.tet_points(k).iter().map(norm).collect();
            assert!(r.iter().any(|&x| x <= 1.0) && r.iter().any(|&x| x >= 1.0));
        }
    }

    #[test]
    fn vertex_on_surface_counts_as_cut() {
        // sphere of radius 5/6 centered at the origin passes through lattice
        // vertex (5/6, 0, 0) at level 1
        let phi = LevelSet::Sphere { radius: 5.0 / 6.0 };
        let mesh = Arc::new(build_mesh(1, None).unwrap());
        let band = extract_active_band(mesh.clone(), &phi).unwrap();
        let v = mesh
            .vertices
            .iter()
            .position(|p| {
                (p[0] - 5.0 / 6.0).abs() < 1e-14 && p[1].abs() < 1e-14 && p[2].abs() < 1e-14
            })
            .unwrap();
        let touching: Vec<usize> = (0..mesh.tets.len())
            .filter(|&t| mesh.tets[t].contains(&v))
            .collect();
        assert!(!touching.is_empty());
        for t in touching {
            assert!(band.cut_tets.contains(&t));
        }
    }

    #[test]
    fn band_growth_between_levels() {
        let phi = LevelSet::sphere();
        let b2 = extract_active_band(Arc::new(build_mesh(2, Some(&phi)).unwrap()), &phi).unwrap();
        let b3 = extract_active_band(Arc::new(build_mesh(3, Some(&phi)).unwrap()), &phi).unwrap();
        let ratio = b3.len() as f64 / b2.len() as f64;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn mesh_is_deterministic_and_dump_has_header() {
        let phi = LevelSet::sphere();
        let a = build_mesh(2, Some(&phi)).unwrap();
        let b = build_mesh(2, Some(&phi)).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(
            first,
            format!(
                "tets {} vertices {} level 2",
                a.tets.len(),
                a.vertices.len()
            )
        );
        assert_eq!(text.lines().count(), 1 + a.tets.len() + a.vertices.len());
    }
}
