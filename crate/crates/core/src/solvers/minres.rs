//! Preconditioned MINRES for the saddle-point system.

use super::apply_saddle;
use crate::assembly::AssembledSystem;
use crate::linalg::{axpy, dot, norm2, CsrMatrix, LuFactor, SpdFactor};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SaddleSolveResult {
    pub u: Vec<f64>,
    /// Pressure coefficients with zero `M0`-weighted mean.
    pub p: Vec<f64>,
    pub iterations: usize,
    /// `‖b − K x‖ / ‖b‖` of the returned solution, Euclidean.
    pub final_residual: f64,
    /// Last preconditioned residual estimate, relative to the initial one.
    pub preconditioned_residual: f64,
}

/// Projections that fix the constant pressure mode.
///
/// `w = M0·1 / (1ᵀM0·1)`. `Q = I − 1wᵀ` makes a vector `M0`-mean-free and
/// `Qᵀ = I − w1ᵀ` is its adjoint, so `Q M★⁻¹ Qᵀ` stays symmetric.
#[derive(Debug, Clone)]
struct ConstantMode {
    w: Vec<f64>,
}

impl ConstantMode {
    fn new(m0: &CsrMatrix) -> Result<Self> {
        let ones = vec![1.0; m0.nrows];
        let m1 = m0.mul_vec(&ones);
        let total: f64 = m1.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Numerical(
                "pressure mass matrix has no positive total".into(),
            ));
        }
        Ok(ConstantMode {
            w: m1.into_iter().map(|v| v / total).collect(),
        })
    }

    /// `x ← Q x`.
    fn remove_mean(&self, x: &mut [f64]) {
        let s = dot(&self.w, x);
        x.iter_mut().for_each(|v| *v -= s);
    }

    /// `x ← Qᵀ x`.
    fn remove_adjoint(&self, x: &mut [f64]) {
        let s: f64 = x.iter().sum();
        axpy(-s, &self.w, x);
    }
}

/// `diag(A⁻¹, Q M★⁻¹ Qᵀ)` with exact sparse Cholesky blocks.
struct BlockPreconditioner {
    a: SpdFactor,
    m: SpdFactor,
    modes: ConstantMode,
    nv: usize,
}

impl BlockPreconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut out = self.a.solve(&r[..self.nv]);
        let mut rp = r[self.nv..].to_vec();
        self.modes.remove_adjoint(&mut rp);
        let mut zp = self.m.solve(&rp);
        self.modes.remove_mean(&mut zp);
        out.extend(zp);
        out
    }
}

/// Right-hand side `(f, g)` with the pressure part made orthogonal to the
/// constant vector so the singular system stays consistent.
fn consistent_rhs(sys: &AssembledSystem) -> Vec<f64> {
    let mut b = sys.f.clone();
    let m = sys.g.len() as f64;
    let mean = sys.g.iter().sum::<f64>() / m;
    b.extend(sys.g.iter().map(|v| v - mean));
    b
}

/// `‖b − K x‖ / ‖b‖`, or the absolute norm for `b = 0`.
fn true_residual(sys: &AssembledSystem, b: &[f64], x: &[f64]) -> f64 {
    let kx = apply_saddle(sys, x);
    let res: Vec<f64> = b.iter().zip(&kx).map(|(p, q)| p - q).collect();
    let bnorm = norm2(b);
    if bnorm > 0.0 {
        norm2(&res) / bnorm
    } else {
        norm2(&res)
    }
}

fn split(sys: &AssembledSystem, x: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut u = x;
    let p = u.split_off(sys.velocity_dofs());
    (u, p)
}

/// Solves `[[A, Bᵀ], [B, −C]] (u, p) = (f, g)` by MINRES with the block
/// diagonal preconditioner `diag(A, M★)`.
pub fn solve_saddle(sys: &AssembledSystem, tol: f64, maxit: usize) -> Result<SaddleSolveResult> {
    let nv = sys.velocity_dofs();
    let np = sys.pressure_dofs();
    if sys.b.ncols != nv
        || sys.c.nrows != np
        || sys.mstar.nrows != np
        || sys.f.len() != nv
        || sys.g.len() != np
    {
        return Err(Error::Usage(
            "saddle-point blocks have inconsistent sizes".into(),
        ));
    }
    let modes = ConstantMode::new(&sys.m0)?;
    let prec = BlockPreconditioner {
        a: SpdFactor::new(&sys.a)?,
        m: SpdFactor::new(&sys.mstar)?,
        modes,
        nv,
    };
    let b = consistent_rhs(sys);
    let n = nv + np;
    let mut x = vec![0.0; n];

    // Paige–Saunders recurrences in the preconditioned form
    let mut v_old = vec![0.0; n];
    let mut v = b.clone();
    let mut z = prec.apply(&v);
    let mut gamma = dot(&z, &v);
    if gamma < 0.0 {
        return Err(Error::Numerical(
            "preconditioner is not positive definite".into(),
        ));
    }
    gamma = gamma.sqrt();
    let gamma0 = gamma;
    let mut gamma_old = 1.0;
    let mut eta = gamma;
    let (mut s_old, mut s) = (0.0, 0.0);
    let (mut c_old, mut c) = (1.0, 1.0);
    let mut w_old = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut iterations = 0;
    let mut rel = if gamma0 > 0.0 { 1.0 } else { 0.0 };

    loop {
        if rel <= tol {
            // the recurrence estimate can drift from the true residual, so confirm it
            let mut xt = x.clone();
            prec.modes.remove_mean(&mut xt[nv..]);
            if true_residual(sys, &b, &xt) <= tol || gamma == 0.0 {
                break;
            }
        }
        if iterations >= maxit {
            return Err(Error::NonConvergence {
                iterations,
                residual: rel,
            });
        }
        iterations += 1;
        z.iter_mut().for_each(|e| *e /= gamma);
        let kz = apply_saddle(sys, &z);
        let delta = dot(&kz, &z);
        let mut v_new = kz;
        axpy(-delta / gamma, &v, &mut v_new);
        axpy(-gamma / gamma_old, &v_old, &mut v_new);
        // residual vectors lie in the range of K, orthogonal to the constant pressure
        let vp = &mut v_new[nv..];
        let mean = vp.iter().sum::<f64>() / np as f64;
        vp.iter_mut().for_each(|e| *e -= mean);
        let z_new = prec.apply(&v_new);
        let gamma_new = dot(&z_new, &v_new).max(0.0).sqrt();

        let a0 = c * delta - c_old * s * gamma;
        let a1 = (a0 * a0 + gamma_new * gamma_new).sqrt();
        let a2 = s * delta + c_old * c * gamma;
        let a3 = s_old * gamma;
        if a1 == 0.0 {
            return Err(Error::Numerical("MINRES breakdown".into()));
        }
        let c_new = a0 / a1;
        let s_new = gamma_new / a1;
        let mut w_new = z.clone();
        axpy(-a3, &w_old, &mut w_new);
        axpy(-a2, &w, &mut w_new);
        w_new.iter_mut().for_each(|e| *e /= a1);
        axpy(c_new * eta, &w_new, &mut x);
        eta *= -s_new;
        rel = eta.abs() / gamma0;

        v_old = std::mem::replace(&mut v, v_new);
        z = z_new;
        gamma_old = gamma;
        gamma = gamma_new;
        w_old = std::mem::replace(&mut w, w_new);
        c_old = c;
        c = c_new;
        s_old = s;
        s = s_new;
        if gamma == 0.0 {
            // exact solution found in the Krylov space
            rel = 0.0;
        }
    }

    prec.modes.remove_mean(&mut x[nv..]);
    let final_residual = true_residual(sys, &b, &x);
    let (u, p) = split(sys, x);
    Ok(SaddleSolveResult {
        u,
        p,
        iterations,
        final_residual,
        preconditioned_residual: rel,
    })
}

/// Direct reference solve: LU of the block system bordered by the `M0`
/// mean constraint on the pressure.
pub fn solve_saddle_direct(sys: &AssembledSystem) -> Result<SaddleSolveResult> {
    let nv = sys.velocity_dofs();
    let np = sys.pressure_dofs();
    let k = sys.block_matrix()?;
    let ones = vec![1.0; np];
    let m1 = sys.m0.mul_vec(&ones);
    let mut trip = Vec::with_capacity(k.nnz() + 2 * np);
    for r in 0..k.nrows {
        let (cols, vals) = k.row(r);
        trip.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, v)));
    }
    let last = nv + np;
    for (i, &v) in m1.iter().enumerate() {
        trip.push((nv + i, last, v));
        trip.push((last, nv + i, v));
    }
    let bordered = CsrMatrix::from_triplets(last + 1, last + 1, &trip);
    let mut b = consistent_rhs(sys);
    b.push(0.0);
    let mut x = LuFactor::new(&bordered)?.solve(&b);
    x.pop();
    b.pop();
    let final_residual = true_residual(sys, &b, &x);
    let (u, p) = split(sys, x);
    Ok(SaddleSolveResult {
        u,
        p,
        iterations: 0,
        final_residual,
        preconditioned_residual: 0.0,
    })
}
