//! Krylov solves of the saddle-point system and inf-sup eigenvalue studies.

pub mod eigen;
pub mod lanczos;
pub mod minres;

pub use eigen::{
    infsup_dense, infsup_sparse, schur_complement, EigenMethod, EigenOptions, EigenResult,
};
pub use minres::{solve_saddle, solve_saddle_direct, SaddleSolveResult};

use crate::assembly::AssembledSystem;
use crate::linalg::axpy;

/// `[[A, Bᵀ], [B, −C]] x`.
pub fn apply_saddle(sys: &AssembledSystem, x: &[f64]) -> Vec<f64> {
    let nv = sys.velocity_dofs();
    let (u, p) = x.split_at(nv);
    let mut top = sys.a.mul_vec(u);
    axpy(1.0, &sys.b.mul_vec_transpose(p), &mut top);
    let mut bottom = sys.b.mul_vec(u);
    axpy(-1.0, &sys.c.mul_vec(p), &mut bottom);
    top.extend(bottom);
    top
}
