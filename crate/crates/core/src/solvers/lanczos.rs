//! Lanczos iteration for operators self-adjoint in a weighted inner product.

use faer::{Mat, Side};

use crate::linalg::{axpy, dot};
use crate::{Error, Result};

/// Which end of the spectrum to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Largest,
    Smallest,
}

#[derive(Debug, Clone)]
pub struct RitzPair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// `‖Op y − θ y‖_W` for the `W`-normalized Ritz vector.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub want: usize,
    pub tol: f64,
    pub max_steps: usize,
    /// Convergence is tested every this many steps.
    pub check_every: usize,
    /// When false, the current Ritz pairs are returned instead of an error
    /// once `max_steps` is reached.
    pub strict: bool,
    /// Measure residuals against the largest `|θ|` seen instead of each
    /// Ritz value, for targets that may sit next to zero.
    pub absolute: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            want: 1,
            tol: 1e-10,
            max_steps: 300,
            check_every: 4,
            strict: true,
            absolute: false,
        }
    }
}

/// Deterministic, non-degenerate start vector.
pub fn start_vector(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.754_877_666).sin())
        .collect()
}

fn ritz(t_alpha: &[f64], t_beta: &[f64]) -> Result<(Vec<f64>, Mat<f64>)> {
    let k = t_alpha.len();
    let t = Mat::from_fn(k, k, |i, j| {
        if i == j {
            t_alpha[i]
        } else if i + 1 == j {
            t_beta[i]
        } else if j + 1 == i {
            t_beta[j]
        } else {
            0.0
        }
    });
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::EigenBreakdown {
            krylov_dim: k,
            reason: format!("tridiagonal eigensolve failed: {e:?}"),
        })?;
    Ok(((0..k).map(|i| evd.S()[i]).collect(), evd.U().to_owned()))
}

/// Extreme eigenpairs of `op`, which must be self-adjoint with respect to
/// `⟨x, y⟩_W = xᵀ W y` where `weight(x) = W x` and `W` is positive definite.
/// Uses full reorthogonalization, so memory grows with the Krylov dimension.
/// Returns the wanted pairs and the Krylov dimension reached.
pub fn lanczos<F, G>(
    op: F,
    weight: G,
    start: &[f64],
    target: Target,
    opts: LanczosOptions,
) -> Result<(Vec<RitzPair>, usize)>
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = start.len();
    let want = opts.want.min(n).max(1);
    let mut q = start.to_vec();
    let mut wq = weight(&q);
    let nrm = dot(&q, &wq).sqrt();
    if !(nrm > 0.0) {
        return Err(Error::EigenBreakdown {
            krylov_dim: 0,
            reason: "start vector has zero weighted norm".into(),
        });
    }
    q.iter_mut().for_each(|v| *v /= nrm);
    wq.iter_mut().for_each(|v| *v /= nrm);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut wbasis: Vec<Vec<f64>> = vec![wq];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let steps = opts.max_steps.min(n);
    let mut previous: Vec<f64> = Vec::new();

    for j in 0..steps {
        let mut w = op(&basis[j]);
        let a = dot(&wbasis[j], &w);
        alpha.push(a);
        // two passes of classical Gram–Schmidt against the whole basis
        for _ in 0..2 {
            for (qi, wqi) in basis.iter().zip(&wbasis) {
                let c = dot(wqi, &w);
                axpy(-c, qi, &mut w);
            }
        }
        let ww = weight(&w);
        let b = dot(&w, &ww).max(0.0).sqrt();
        let k = j + 1;
        let scale = alpha
            .iter()
            .chain(&beta)
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let exhausted = b <= 1e-13 * scale.max(f64::MIN_POSITIVE) || k == steps;
        if k >= want && (k % opts.check_every == 0 || exhausted) {
            let (vals, vecs) = ritz(&alpha, &beta)?;
            let order: Vec<usize> = match target {
                Target::Smallest => (0..k).collect(),
                Target::Largest => (0..k).rev().collect(),
            };
            let picked = &order[..want];
            let resid = |i: usize| (b * vecs[(k - 1, i)]).abs();
            // Ritz values converge like the square of the residual, so inside
            // tight clusters a settled value with a √tol residual is accepted too
            let current: Vec<f64> = picked.iter().map(|&i| vals[i]).collect();
            let settled = previous.len() == want
                && current
                    .iter()
                    .zip(&previous)
                    .all(|(c, p)| (c - p).abs() <= opts.tol * c.abs());
            let done = picked.iter().all(|&i| {
                let floor = if opts.absolute {
                    scale
                } else {
                    vals[i].abs().max(opts.tol * scale)
                };
                resid(i) <= opts.tol * floor || (settled && resid(i) <= opts.tol.sqrt() * floor)
            });
            previous = current;
            if done || exhausted {
                if !done && b > 1e-13 * scale && opts.strict {
                    return Err(Error::EigenBreakdown {
                        krylov_dim: k,
                        reason: format!("{want} Ritz pairs not converged to {:.1e}", opts.tol),
                    });
                }
                let pairs = picked
                    .iter()
                    .map(|&i| {
                        let mut y = vec![0.0; n];
                        for (r, qr) in basis.iter().enumerate() {
                            axpy(vecs[(r, i)], qr, &mut y);
                        }
                        RitzPair {
                            value: vals[i],
                            vector: y,
                            residual: resid(i),
                        }
                    })
                    .collect();
                return Ok((pairs, k));
            }
        }
        if exhausted {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|v| v / b).collect());
        wbasis.push(ww.iter().map(|v| v / b).collect());
    }
    Err(Error::EigenBreakdown {
        krylov_dim: alpha.len(),
        reason: "Krylov space exhausted".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_diagonal_problem() {
        // K y = θ W y with K = diag(1..n), W = diag(2); op = W⁻¹K
        let n = 60;
        let op = |x: &[f64]| {
            x.iter()
                .enumerate()
                .map(|(i, v)| (i as f64 + 1.0) * v / 2.0)
                .collect::<Vec<_>>()
        };
        let weight = |x: &[f64]| x.iter().map(|v| 2.0 * v).collect::<Vec<_>>();
        let opts = LanczosOptions {
            want: 2,
            tol: 1e-10,
            max_steps: 60,
            check_every: 1,
            strict: true,
            absolute: false,
        };
        let (top, _) = lanczos(op, weight, &start_vector(n), Target::Largest, opts).unwrap();
        assert!((top[0].value - 30.0).abs() < 1e-8 && (top[1].value - 29.5).abs() < 1e-8);
        let (low, _) = lanczos(op, weight, &start_vector(n), Target::Smallest, opts).unwrap();
        assert!((low[0].value - 0.5).abs() < 1e-8 && (low[1].value - 1.0).abs() < 1e-8);
        let v = &low[0].vector;
        assert!((dot(v, &weight(v)) - 1.0).abs() < 1e-10);
    }
}
