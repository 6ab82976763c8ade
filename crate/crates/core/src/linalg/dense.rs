//! Dense symmetric-definite generalized eigenproblems.

use faer::linalg::triangular_solve::{
    solve_lower_triangular_in_place, solve_upper_triangular_in_place,
};
use faer::{Mat, Par, Side};

use crate::{Error, Result};

/// Eigenpairs of `S y = λ M y` with `M` symmetric positive definite.
/// Eigenvalues ascend; eigenvectors are `M`-orthonormal columns.
pub fn generalized_eigen(s: &Mat<f64>, m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = s.nrows();
    let llt = m
        .llt(Side::Lower)
        .map_err(|e| Error::Numerical(format!("dense Cholesky of M failed: {e:?}")))?;
    let l = llt.L().to_owned();
    // C = L⁻¹ S L⁻ᵀ
    let mut c = s.clone();
    solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), Par::Seq);
    let mut ct = c.transpose().to_owned();
    solve_lower_triangular_in_place(l.as_ref(), ct.as_mut(), Par::Seq);
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (ct[(i, j)] + ct[(j, i)]));
    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("dense eigensolver failed: {e:?}")))?;
    let values: Vec<f64> = (0..n).map(|i| evd.S()[i]).collect();
    let mut vectors = evd.U().to_owned();
    solve_upper_triangular_in_place(l.transpose(), vectors.as_mut(), Par::Seq);
    Ok((values, vectors))
}
