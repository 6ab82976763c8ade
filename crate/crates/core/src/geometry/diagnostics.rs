//! Per-element checks of the local surface patches.

use std::collections::HashMap;

use serde::Serialize;

use super::cut::{triangle_area, CutSurface, EdgeKey};
use crate::mesh::{norm, sub, ActiveBand};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TetDiagnostic {
    /// Connected components of the patch `T ∩ Γ_h`.
    pub components: usize,
    /// Length of the patch boundary on `∂T`, divided by `h_T`.
    pub boundary_ratio: f64,
    /// `|Γ_T| / h_T²`.
    pub area_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticReport {
    pub per_tet: Vec<TetDiagnostic>,
    pub ratio_threshold: f64,
    pub max_components: usize,
    pub max_boundary_ratio: f64,
    /// Tets with more than one component or a ratio above the threshold.
    pub flagged: Vec<usize>,
    /// Fraction of cut tets with `|Γ_T| ≥ 0.01 h_T²`.
    pub regular_fraction: f64,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut j = i;
        while self.0[j] != r {
            let next = self.0[j];
            self.0[j] = r;
            j = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn edge(a: EdgeKey, b: EdgeKey) -> (EdgeKey, EdgeKey) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn check_mesh_assumption(
    band: &ActiveBand,
    cut: &CutSurface,
    ratio_threshold: f64,
) -> DiagnosticReport {
    let mut per_tet = Vec::with_capacity(band.len());
    for (k, patch) in cut.patches.iter().enumerate() {
        let h_t = band.mesh.tet_diameter(band.cut_tets[k]);
        let n = patch.triangles.len();
        let mut uf = UnionFind((0..n).collect());
        let mut owner: HashMap<(EdgeKey, EdgeKey), (usize, usize, f64)> = HashMap::new();
        for (t, (tri, keys)) in patch.triangles.iter().zip(&patch.keys).enumerate() {
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let len = norm(&sub(&tri[i], &tri[j]));
                let e = owner.entry(edge(keys[i], keys[j])).or_insert((t, 0, len));
                if e.1 > 0 || e.0 != t {
                    uf.union(e.0, t);
                }
                e.1 += 1;
            }
        }
        let components = (0..n).filter(|&t| uf.find(t) == t).count();
        // edges seen once lie on the tet boundary
        let boundary: f64 = owner.values().filter(|e| e.1 == 1).map(|e| e.2).sum();
        let area: f64 = patch.triangles.iter().map(triangle_area).sum();
        per_tet.push(TetDiagnostic {
            components,
            boundary_ratio: boundary / h_t,
            area_ratio: area / (h_t * h_t),
        });
    }
    let flagged = per_tet
        .iter()
        .enumerate()
        .filter(|(_, d)| d.components > 1 || d.boundary_ratio > ratio_threshold)
        .map(|(k, _)| k)
        .collect();
    let regular = per_tet.iter().filter(|d| d.area_ratio >= 0.01).count();
    DiagnosticReport {
        max_components: per_tet.iter().map(|d| d.components).max().unwrap_or(0),
        max_boundary_ratio: per_tet.iter().map(|d| d.boundary_ratio).fold(0.0, f64::max),
        regular_fraction: if per_tet.is_empty() {
            0.0
        } else {
            regular as f64 / per_tet.len() as f64
        },
        per_tet,
        ratio_threshold,
        flagged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{extract_cut_surface, LevelSet};
    use crate::mesh::{build_mesh, extract_active_band};
    use std::sync::Arc;

    #[test]
    fn sphere_patches_are_single_components() {
        let phi = LevelSet::sphere();
        for level in [2, 3] {
            let band = extract_active_band(Arc::new(build_mesh(level, Some(&phi)).unwrap()), &phi)
                .unwrap();
            let cut = extract_cut_surface(&band, &phi, 1).unwrap();
            let rep = check_mesh_assumption(&band, &cut, 10.0);
            assert_eq!(rep.max_components, 1);
            assert!(rep.flagged.is_empty());
            assert!(rep.max_boundary_ratio.is_finite() && rep.max_boundary_ratio > 0.0);
            assert!(rep.regular_fraction > 0.0 && rep.regular_fraction <= 1.0);
        }
    }
}
