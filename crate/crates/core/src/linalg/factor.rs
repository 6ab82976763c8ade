//! Sparse direct factorizations.

use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{self, LdltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{Conj, Mat, Par, Side};

use super::CsrMatrix;
use crate::{Error, Result};

/// Cholesky factor of a sparse symmetric positive definite matrix.
#[derive(Debug)]
pub struct SpdFactor {
    n: usize,
    llt: Llt<usize, f64>,
}

impl SpdFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Usage("Cholesky needs a square matrix".into()));
        }
        let llt = a.to_faer()?.sp_cholesky(Side::Lower).map_err(|e| {
            Error::Numerical(format!(
                "sparse Cholesky failed (matrix not positive definite?): {e:?}"
            ))
        })?;
        Ok(SpdFactor { n: a.nrows, llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(m.as_mut());
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }

    /// Solves for every column of `rhs` in place.
    pub fn solve_many(&self, rhs: &mut Mat<f64>) {
        self.llt.solve_in_place(rhs.as_mut());
    }
}

/// LU factor with partial pivoting, for indefinite systems.
#[derive(Debug)]
pub struct LuFactor {
    n: usize,
    lu: Lu<usize, f64>,
}

impl LuFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Usage("LU needs a square matrix".into()));
        }
        let lu = a
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::Numerical(format!("sparse LU failed: {e:?}")))?;
        Ok(LuFactor { n: a.nrows, lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(m.as_mut());
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }
}

/// `LDLᵀ` without pivoting, after a fill-reducing symmetric ordering.
///
/// Only safe for quasi-definite matrices `[[K, Gᵀ], [G, −N]]` with `K` and `N`
/// positive definite, which factor stably under any symmetric permutation.
#[derive(Debug)]
pub struct QuasiDefiniteFactor {
    n: usize,
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
}

impl QuasiDefiniteFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Usage("LDLT needs a square matrix".into()));
        }
        let fa = a.to_faer()?;
        let symbolic = cholesky::factorize_symbolic_cholesky(
            fa.symbolic(),
            Side::Lower,
            SymmetricOrdering::Amd,
            Default::default(),
        )
        .map_err(|e| Error::Numerical(format!("symbolic LDLT failed: {e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let req = symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default());
        let mut mem = MemBuffer::new(req);
        symbolic
            .factorize_numeric_ldlt(
                &mut values,
                fa.as_ref(),
                Side::Lower,
                Default::default(),
                Par::Seq,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|e| Error::Numerical(format!("numeric LDLT failed: {e:?}")))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("LDLT produced non-finite entries".into()));
        }
        Ok(QuasiDefiniteFactor {
            n: a.nrows,
            symbolic,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let req = StackReq::any_of(&[self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq)]);
        let mut mem = MemBuffer::new(req);
        LdltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            m.as_mut(),
            Par::Seq,
            MemStack::new(&mut mem),
        );
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn cholesky_and_lu_solve() {
        let a = laplacian(50);
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.mul_vec(&x);
        for y in [
            SpdFactor::new(&a).unwrap().solve(&b),
            LuFactor::new(&a).unwrap().solve(&b),
        ] {
            let err = x
                .iter()
                .zip(&y)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-10);
        }
        assert!(SpdFactor::new(&a.scaled(-1.0)).is_err());
    }

    #[test]
    fn lu_handles_saddle_points() {
        // [[2, 1], [1, 0]] is indefinite
        let k = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let y = LuFactor::new(&k).unwrap().solve(&[3.0, 1.0]);
        assert!((y[0] - 1.0).abs() < 1e-14 && (y[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ldlt_on_quasi_definite_block() {
        let a = laplacian(30);
        let g = CsrMatrix::from_triplets(
            3,
            30,
            &[(0, 0, 1.0), (1, 10, 1.0), (2, 29, 1.0), (2, 5, 0.5)],
        );
        let n = CsrMatrix::identity(3).scaled(-0.1);
        let gt = g.transpose();
        let k = CsrMatrix::block(&[vec![Some(&a), Some(&gt)], vec![Some(&g), Some(&n)]]).unwrap();
        let x: Vec<f64> = (0..33).map(|i| (i as f64 * 0.7).cos()).collect();
        let y = QuasiDefiniteFactor::new(&k).unwrap().solve(&k.mul_vec(&x));
        let err = x
            .iter()
            .zip(&y)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10);
    }
}
