//! Inf-sup eigenvalue analysis of the pressure Schur complement.

use faer::Mat;
use serde::Serialize;

use super::apply_saddle;
use super::lanczos::{lanczos, start_vector, LanczosOptions, Target};
use crate::assembly::AssembledSystem;
use crate::linalg::{dense, dot, CsrMatrix, QuasiDefiniteFactor, SpdFactor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenMethod {
    Dense,
    SparsePerturbed,
}

impl EigenMethod {
    pub fn label(self) -> &'static str {
        match self {
            EigenMethod::Dense => "dense",
            EigenMethod::SparsePerturbed => "sparse-perturbed",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Largest pressure dimension accepted by the dense path.
    pub dense_cap: usize,
    /// Number of smallest eigenvalues resolved by the sparse path.
    pub count: usize,
    pub tol: f64,
    pub max_krylov: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            dense_cap: 3000,
            count: 3,
            tol: 1e-10,
            max_krylov: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    /// Ascending. The dense path returns the full spectrum, the sparse path
    /// the smallest `count` values followed by the largest.
    pub lambda_list: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_m: f64,
    /// Zero for the dense path.
    pub epsilon: f64,
    pub method: EigenMethod,
    /// `|cos|` between the first eigenvector and the constant vector.
    pub constant_cosine: f64,
    /// Krylov dimension of the low-end iteration (zero for the dense path).
    pub krylov_dim: usize,
}

fn constant_cosine(y: &[f64]) -> f64 {
    let s: f64 = y.iter().sum();
    let n = dot(y, y).sqrt() * (y.len() as f64).sqrt();
    if n > 0.0 {
        s.abs() / n
    } else {
        0.0
    }
}

/// `S★ = B A⁻¹ Bᵀ + C★` as a dense matrix.
pub fn schur_complement(sys: &AssembledSystem) -> Result<Mat<f64>> {
    let nv = sys.velocity_dofs();
    let np = sys.pressure_dofs();
    let fa = SpdFactor::new(&sys.a)?;
    let mut x = Mat::<f64>::zeros(nv, np);
    for i in 0..np {
        let (cols, vals) = sys.b.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            x[(c, i)] = v;
        }
    }
    fa.solve_many(&mut x);
    let mut s = Mat::<f64>::zeros(np, np);
    for j in 0..np {
        let xj = x.col(j);
        for i in 0..np {
            let (cols, vals) = sys.b.row(i);
            s[(i, j)] = cols.iter().zip(vals).map(|(&c, &v)| v * xj[c]).sum();
        }
    }
    for i in 0..np {
        let (cols, vals) = sys.c.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            s[(i, c)] += v;
        }
    }
    Ok(Mat::from_fn(np, np, |i, j| 0.5 * (s[(i, j)] + s[(j, i)])))
}

/// Full spectrum of `S★ y = λ M★ y`.
pub fn infsup_dense(sys: &AssembledSystem, opts: &EigenOptions) -> Result<EigenResult> {
    let np = sys.pressure_dofs();
    if np > opts.dense_cap {
        return Err(Error::Usage(format!(
            "{np} pressure unknowns exceed the dense cap {}; use the sparse path",
            opts.dense_cap
        )));
    }
    let s = schur_complement(sys)?;
    let (vals, vecs) = dense::generalized_eigen(&s, &sys.mstar.to_dense())?;
    let y0: Vec<f64> = (0..np).map(|i| vecs[(i, 0)]).collect();
    Ok(EigenResult {
        lambda1: vals[0],
        lambda2: vals.get(1).copied().unwrap_or(f64::NAN),
        lambda_m: vals[np - 1],
        lambda_list: vals,
        epsilon: 0.0,
        method: EigenMethod::Dense,
        constant_cosine: constant_cosine(&y0),
        krylov_dim: 0,
    })
}

/// `diag(ε I, M★)`.
fn perturbed_weight(sys: &AssembledSystem, eps: f64, x: &[f64]) -> Vec<f64> {
    let nv = sys.velocity_dofs();
    let mut out: Vec<f64> = x[..nv].iter().map(|v| eps * v).collect();
    out.extend(sys.mstar.mul_vec(&x[nv..]));
    out
}

/// Solves with an `LDLᵀ` factor, refining against `k` when the indefinite
/// factorization loses accuracy.
fn refined_solve(f: &QuasiDefiniteFactor, k: &CsrMatrix, b: &[f64]) -> Vec<f64> {
    let mut x = f.solve(b);
    let bn = dot(b, b).sqrt();
    for _ in 0..3 {
        let r: Vec<f64> = b.iter().zip(k.mul_vec(&x)).map(|(p, q)| p - q).collect();
        if dot(&r, &r).sqrt() <= 1e-13 * bn {
            break;
        }
        let dx = f.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
    }
    x
}

/// `𝒜★ + s 𝓜★^ε = [[A + sεI, Bᵀ], [B, s M★ − C★]]`.
fn shifted_pencil(sys: &AssembledSystem, eps: f64, s: f64) -> Result<CsrMatrix> {
    let ident = CsrMatrix::identity(sys.velocity_dofs());
    let a = sys.a.add_scaled(&ident, s * eps);
    let c = sys.mstar.scaled(s).add_scaled(&sys.c, -1.0);
    let bt = sys.b.transpose();
    CsrMatrix::block(&[vec![Some(&a), Some(&bt)], vec![Some(&sys.b), Some(&c)]])
}

/// Largest eigenvalue of the perturbed pencil.
///
/// The top of the spectrum is a tight cluster just below one, which plain
/// Lanczos resolves slowly. A short unconverged run on the Schur operator
/// gives a lower bound `θ₀`; shift-invert at `s` slightly above it then
/// separates the cluster. Eigenvalues above `s` show up as negative
/// transformed values, in which case the shift is raised and the step
/// repeated.
fn largest_perturbed(sys: &AssembledSystem, eps: f64, opts: &EigenOptions) -> Result<f64> {
    let np = sys.pressure_dofs();
    let nv = sys.velocity_dofs();
    let fa = SpdFactor::new(&sys.a)?;
    let fm = SpdFactor::new(&sys.mstar)?;
    let schur = |y: &[f64]| {
        let mut r = sys.b.mul_vec(&fa.solve(&sys.b.mul_vec_transpose(y)));
        let cy = sys.c.mul_vec(y);
        r.iter_mut().zip(&cy).for_each(|(a, b)| *a += b);
        fm.solve(&r)
    };
    let rough = LanczosOptions {
        want: 1,
        tol: opts.tol,
        max_steps: 40.min(opts.max_krylov),
        check_every: 4,
        strict: false,
        absolute: false,
    };
    let (top, _) = lanczos(
        schur,
        |y| sys.mstar.mul_vec(y),
        &start_vector(np),
        Target::Largest,
        rough,
    )?;
    let mut s = top[0].value * (1.0 + 1e-3);
    let weight = |x: &[f64]| perturbed_weight(sys, eps, x);
    let mut start = vec![0.0; nv];
    start.extend(start_vector(np));
    // θ = 1/(s − λ) is of order 1/(s − λ_m), so a residual tolerance of
    // √tol relative to θ still fixes λ_m to about tol; a tighter target
    // stalls inside the cluster below λ_m
    let lopts = LanczosOptions {
        want: 1,
        tol: opts.tol.sqrt(),
        max_steps: opts.max_krylov,
        check_every: 4,
        strict: true,
        absolute: false,
    };
    for _ in 0..6 {
        let k = shifted_pencil(sys, eps, s)?;
        let fk = QuasiDefiniteFactor::new(&k)?;
        let op = |x: &[f64]| refined_solve(&fk, &k, &weight(x));
        // θ = 1/(s − λ): eigenvalues above the shift are negative
        let probe = LanczosOptions {
            absolute: true,
            tol: 1e-8,
            strict: false,
            max_steps: 80,
            ..lopts
        };
        let (low, _) = lanczos(op, weight, &start, Target::Smallest, probe)?;
        if low[0].value < -10.0 * low[0].residual {
            let above = s - 1.0 / low[0].value;
            s = above * (1.0 + 1e-3);
            continue;
        }
        let (high, _) = lanczos(op, weight, &start, Target::Largest, lopts)?;
        let z = &high[0].vector;
        return Ok(-dot(z, &apply_saddle(sys, z)) / dot(z, &weight(z)));
    }
    Err(Error::EigenBreakdown {
        krylov_dim: opts.max_krylov,
        reason: "shift for the largest eigenvalue did not settle".into(),
    })
}

/// Extreme eigenvalues of `𝒜★ z = −λ 𝓜★^ε z` with `𝓜★^ε = diag(ε I, M★)`.
///
/// The `O(1)` cluster is separated from the `O(ε⁻¹)` one by sign after a
/// shift-invert transform: with a small shift `δ > 0`, the matrix
/// `𝒜★ − δ𝓜` is quasi-definite and every `O(1)` eigenvalue maps to a
/// negative `θ = −1/(λ + δ)`.
pub fn infsup_sparse(sys: &AssembledSystem, eps: f64, opts: &EigenOptions) -> Result<EigenResult> {
    if !(eps > 0.0 && eps <= 1e-3) {
        return Err(Error::Usage(format!(
            "perturbation ε = {eps} outside (0, 1e-3]"
        )));
    }
    let nv = sys.velocity_dofs();
    let np = sys.pressure_dofs();
    let lambda_m = largest_perturbed(sys, eps, opts)?;

    let delta = 1e-4 * lambda_m;
    let ident = CsrMatrix::identity(nv);
    let a_shift = sys.a.add_scaled(&ident, -delta * eps);
    let c_shift = sys.c.add_scaled(&sys.mstar, delta).scaled(-1.0);
    let bt = sys.b.transpose();
    let k = CsrMatrix::block(&[
        vec![Some(&a_shift), Some(&bt)],
        vec![Some(&sys.b), Some(&c_shift)],
    ])?;
    let fk = QuasiDefiniteFactor::new(&k)?;
    let weight = |x: &[f64]| perturbed_weight(sys, eps, x);
    let op = |x: &[f64]| fk.solve(&weight(x));
    let want = opts.count.clamp(2, np);
    let lopts = LanczosOptions {
        want,
        tol: opts.tol,
        max_steps: opts.max_krylov,
        check_every: 4,
        strict: true,
        absolute: false,
    };
    let mut start = vec![0.0; nv];
    start.extend(start_vector(np));
    let (pairs, krylov_dim) = lanczos(op, weight, &start, Target::Smallest, lopts)?;
    let mut low = Vec::with_capacity(want);
    for pr in &pairs {
        if pr.value >= 0.0 {
            return Err(Error::EigenBreakdown {
                krylov_dim,
                reason: "fewer O(1) eigenvalues than requested".into(),
            });
        }
        // Rayleigh quotient of the Ritz vector is second-order accurate
        let z = &pr.vector;
        let lam = -dot(z, &apply_saddle(sys, z)) / dot(z, &weight(z));
        low.push((lam, constant_cosine(&z[nv..])));
    }
    low.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut lambda_list: Vec<f64> = low.iter().map(|v| v.0).collect();
    lambda_list.push(lambda_m);
    Ok(EigenResult {
        lambda1: low[0].0,
        lambda2: low[1].0,
        lambda_m,
        lambda_list,
        epsilon: eps,
        method: EigenMethod::SparsePerturbed,
        constant_cosine: low[0].1,
        krylov_dim,
    })
}
