//! Element-parallel assembly of the trace forms.
//!
//! Local blocks are computed independently per band tet and scattered into a
//! precomputed CSR pattern in element order, so results do not depend on the
//! number of workers.

use serde::{Deserialize, Serialize};

use crate::fem::DiscreteSpace;
use crate::geometry::{BandQuadrature, CutSurface, SurfacePoint};
use crate::linalg::{CsrMatrix, PatternBuilder};
use crate::mesh::{ActiveBand, Point};
use crate::par::{self, ExecMode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stabilization {
    None,
    Normal,
    Full,
}

impl Stabilization {
    pub fn label(self) -> &'static str {
        match self {
            Stabilization::None => "none",
            Stabilization::Normal => "normal",
            Stabilization::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormVariant {
    /// `E_s(u) − u_N H` in the viscous term.
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormParameters {
    /// Normal penalty τ.
    pub tau: f64,
    /// Velocity volume stabilization ρ_u.
    pub rho_u: f64,
    /// Pressure volume stabilization ρ_p.
    pub rho_p: f64,
    pub variant: FormVariant,
}

impl FormParameters {
    /// `τ = c_τ h⁻²`, `ρ_u = c_u h^{ρ_u exponent}`, `ρ_p = c_p h`.
    pub fn scaled(
        h: f64,
        c_tau: f64,
        c_u: f64,
        rho_u_exponent: i32,
        c_p: f64,
        variant: FormVariant,
    ) -> Self {
        FormParameters {
            tau: c_tau / (h * h),
            rho_u: c_u * h.powi(rho_u_exponent),
            rho_p: c_p * h,
            variant,
        }
    }
}

/// Everything the forms are integrated over.
#[derive(Debug, Clone, Copy)]
pub struct FormContext<'a> {
    pub band: &'a ActiveBand,
    pub cut: &'a CutSurface,
    pub vel: &'a DiscreteSpace,
    pub pres: &'a DiscreteSpace,
    pub mode: ExecMode,
}

const BATCH: usize = 2048;

/// Global unknowns of band tet `k`, ordered `local node · components + c`.
pub fn tet_dofs(space: &DiscreteSpace, k: usize) -> Vec<usize> {
    let nc = space.components;
    space
        .local_nodes(k)
        .iter()
        .flat_map(|&n| (0..nc).map(move |c| n * nc + c))
        .collect()
}

fn assemble_matrix<F>(
    mode: ExecMode,
    rows: &DiscreteSpace,
    cols: &DiscreteSpace,
    local: F,
) -> Result<CsrMatrix>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync,
{
    let ntets = rows.tet_count();
    let mut pb = PatternBuilder::new(rows.dof_count(), cols.dof_count());
    for k in 0..ntets {
        pb.add_block(&tet_dofs(rows, k), &tet_dofs(cols, k));
    }
    let mut mat = pb.build();
    let nr = rows.local_count() * rows.components;
    let nc = cols.local_count() * cols.components;
    for start in (0..ntets).step_by(BATCH) {
        let len = BATCH.min(ntets - start);
        let blocks = par::map_indexed(mode, len, |i| {
            let mut buf = vec![0.0; nr * nc];
            local(start + i, &mut buf).map(|_| buf)
        });
        for (i, block) in blocks.into_iter().enumerate() {
            let block = block?;
            let (rd, cd) = (tet_dofs(rows, start + i), tet_dofs(cols, start + i));
            for (a, &r) in rd.iter().enumerate() {
                for (b, &c) in cd.iter().enumerate() {
                    mat.add(r, c, block[a * nc + b]);
                }
            }
        }
    }
    Ok(mat)
}

fn assemble_vector<F>(mode: ExecMode, space: &DiscreteSpace, local: F) -> Result<Vec<f64>>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync,
{
    let ntets = space.tet_count();
    let nl = space.local_count() * space.components;
    let mut out = vec![0.0; space.dof_count()];
    for start in (0..ntets).step_by(BATCH) {
        let len = BATCH.min(ntets - start);
        let blocks = par::map_indexed(mode, len, |i| {
            let mut buf = vec![0.0; nl];
            local(start + i, &mut buf).map(|_| buf)
        });
        for (i, block) in blocks.into_iter().enumerate() {
            let block = block?;
            for (a, &r) in tet_dofs(space, start + i).iter().enumerate() {
                out[r] += block[a];
            }
        }
    }
    Ok(out)
}

fn check_spaces(ctx: &FormContext<'_>) -> Result<()> {
    if ctx.vel.components != 3 || ctx.pres.components != 1 {
        return Err(Error::Usage(
            "velocity must have three components and pressure one".into(),
        ));
    }
    if ctx.vel.tet_count() != ctx.band.len() || ctx.pres.tet_count() != ctx.band.len() {
        return Err(Error::Usage("spaces were built on a different band".into()));
    }
    if ctx.cut.patches.len() != ctx.band.len() {
        return Err(Error::Usage(
            "cut surface was extracted on a different band".into(),
        ));
    }
    Ok(())
}

fn unit_normal(ctx: &FormContext<'_>, x: &Point) -> [f64; 3] {
    let g = ctx.cut.level_set.gradient(x);
    let len = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    g.map(|c| c / len)
}

fn matvec3(m: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

/// Velocity form `A_h` (or the consistent `Ã_h`), including the volume term.
pub fn assemble_a(ctx: &FormContext<'_>, params: &FormParameters) -> Result<CsrMatrix> {
    check_spaces(ctx)?;
    let consistent = params.variant == FormVariant::Consistent;
    let n = ctx.vel.local_count();
    let nl = 3 * n;
    assemble_matrix(ctx.mode, ctx.vel, ctx.vel, |k, out| {
        let mut g = [[0.0; 3]; 10];
        let mut q = [[0.0; 3]; 10];
        ctx.cut.for_each_point(ctx.band, k, |sp: &SurfacePoint| {
            let b = ctx.vel.eval_bary(k, &sp.bary);
            let fr = &sp.frame;
            for a in 0..n {
                g[a] = matvec3(&fr.p, &b.grads[a]);
                q[a] = matvec3(&fr.h, &g[a]);
            }
            let hh: f64 = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| fr.h[i][j] * fr.h[i][j])
                .sum();
            let w = sp.weight;
            for a in 0..n {
                let pa = b.values[a];
                for bb in 0..n {
                    let pb = b.values[bb];
                    let gab = g[a][0] * g[bb][0] + g[a][1] * g[bb][1] + g[a][2] * g[bb][2];
                    for c in 0..3 {
                        for d in 0..3 {
                            // 2 E_ac : E_bd = P_cd (g_a·g_b) + (g_b)_c (g_a)_d
                            let mut v = fr.p[c][d] * gab + g[bb][c] * g[a][d];
                            if consistent {
                                v += -2.0 * pb * fr.n[d] * q[a][c] - 2.0 * pa * fr.n[c] * q[bb][d]
                                    + 2.0 * pa * pb * fr.n[c] * fr.n[d] * hh;
                            }
                            v += params.tau * pa * pb * fr.n[c] * fr.n[d];
                            if c == d {
                                v += pa * pb;
                            }
                            out[(a * 3 + c) * nl + bb * 3 + d] += w * v;
                        }
                    }
                }
            }
        })?;
        if params.rho_u != 0.0 {
            let mut dn = [0.0; 10];
            BandQuadrature.for_each_point(ctx.band, k, |x, w, l| {
                let nrm = unit_normal(ctx, x);
                let b = ctx.vel.eval_bary(k, l);
                for a in 0..n {
                    dn[a] =
                        b.grads[a][0] * nrm[0] + b.grads[a][1] * nrm[1] + b.grads[a][2] * nrm[2];
                }
                for a in 0..n {
                    for bb in 0..n {
                        let v = params.rho_u * w * dn[a] * dn[bb];
                        for c in 0..3 {
                            out[(a * 3 + c) * nl + bb * 3 + c] += v;
                        }
                    }
                }
            });
        }
        Ok(())
    })
}

/// `B(i, j) = ∫_{Γ_h} φ_j · P∇ψ_i`, pressure rows and velocity columns.
pub fn assemble_b(ctx: &FormContext<'_>) -> Result<CsrMatrix> {
    check_spaces(ctx)?;
    let nv = ctx.vel.local_count();
    let np = ctx.pres.local_count();
    assemble_matrix(ctx.mode, ctx.pres, ctx.vel, |k, out| {
        ctx.cut.for_each_point(ctx.band, k, |sp| {
            let bv = ctx.vel.eval_bary(k, &sp.bary);
            let bp = ctx.pres.eval_bary(k, &sp.bary);
            for i in 0..np {
                let pg = matvec3(&sp.frame.p, &bp.grads[i]);
                for a in 0..nv {
                    let s = sp.weight * bv.values[a];
                    for c in 0..3 {
                        out[i * 3 * nv + a * 3 + c] += s * pg[c];
                    }
                }
            }
        })
    })
}

/// Pressure volume stabilization over the full band tets.
pub fn assemble_c(ctx: &FormContext<'_>, kind: Stabilization, rho_p: f64) -> Result<CsrMatrix> {
    check_spaces(ctx)?;
    let np = ctx.pres.local_count();
    assemble_matrix(ctx.mode, ctx.pres, ctx.pres, |k, out| {
        if kind == Stabilization::None {
            return Ok(());
        }
        BandQuadrature.for_each_point(ctx.band, k, |x, w, l| {
            let b = ctx.pres.eval_bary(k, l);
            let nrm = unit_normal(ctx, x);
            for i in 0..np {
                for j in 0..np {
                    let gi = &b.grads[i];
                    let gj = &b.grads[j];
                    let v = match kind {
                        Stabilization::Normal => {
                            (gi[0] * nrm[0] + gi[1] * nrm[1] + gi[2] * nrm[2])
                                * (gj[0] * nrm[0] + gj[1] * nrm[1] + gj[2] * nrm[2])
                        }
                        _ => gi[0] * gj[0] + gi[1] * gj[1] + gi[2] * gj[2],
                    };
                    out[i * np + j] += rho_p * w * v;
                }
            }
        });
        Ok(())
    })
}

/// Surface mass matrix `M0` of the pressure space.
pub fn assemble_mass(ctx: &FormContext<'_>) -> Result<CsrMatrix> {
    check_spaces(ctx)?;
    let np = ctx.pres.local_count();
    assemble_matrix(ctx.mode, ctx.pres, ctx.pres, |k, out| {
        ctx.cut.for_each_point(ctx.band, k, |sp| {
            let b = ctx.pres.eval_bary(k, &sp.bary);
            for i in 0..np {
                for j in 0..np {
                    out[i * np + j] += sp.weight * b.values[i] * b.values[j];
                }
            }
        })
    })
}

/// Pointwise data `(f, g)` at a surface quadrature point.
pub type Forcing<'f> = dyn Fn(&Point) -> Result<([f64; 3], f64)> + Sync + 'f;

/// Load vectors `f_i = ∫ f·φ_i` and `g_i = −∫ (g − ḡ) ψ_i`, with `ḡ` the mean
/// of `g` on `Γ_h`.
pub fn assemble_rhs(ctx: &FormContext<'_>, forcing: &Forcing<'_>) -> Result<(Vec<f64>, Vec<f64>)> {
    check_spaces(ctx)?;
    let nv = ctx.vel.local_count();
    let np = ctx.pres.local_count();
    // both vectors come from one pass so the forcing is evaluated once per point
    let ntets = ctx.band.len();
    let mut fvec = vec![0.0; ctx.vel.dof_count()];
    let mut gvec = vec![0.0; ctx.pres.dof_count()];
    for start in (0..ntets).step_by(BATCH) {
        let len = BATCH.min(ntets - start);
        let blocks = par::map_indexed(ctx.mode, len, |i| -> Result<(Vec<f64>, Vec<f64>)> {
            let k = start + i;
            let mut fl = vec![0.0; 3 * nv];
            let mut gl = vec![0.0; np];
            let mut err = None;
            ctx.cut.for_each_point(ctx.band, k, |sp| {
                if err.is_some() {
                    return;
                }
                let (f, g) = match forcing(&sp.x) {
                    Ok(v) => v,
                    Err(e) => {
                        err = Some(e);
                        return;
                    }
                };
                let bv = ctx.vel.eval_bary(k, &sp.bary);
                let bp = ctx.pres.eval_bary(k, &sp.bary);
                for a in 0..nv {
                    for c in 0..3 {
                        fl[a * 3 + c] += sp.weight * f[c] * bv.values[a];
                    }
                }
                // the continuity equation reads b(u, q) − s(p, q) = (−g, q)
                for i in 0..np {
                    gl[i] -= sp.weight * g * bp.values[i];
                }
            })?;
            match err {
                Some(e) => Err(e),
                None => Ok((fl, gl)),
            }
        });
        for (i, block) in blocks.into_iter().enumerate() {
            let (fl, gl) = block?;
            for (a, &r) in tet_dofs(ctx.vel, start + i).iter().enumerate() {
                fvec[r] += fl[a];
            }
            for (a, &r) in tet_dofs(ctx.pres, start + i).iter().enumerate() {
                gvec[r] += gl[a];
            }
        }
    }
    // Γ_h is not Γ, so ∫_{Γ_h} g drifts from zero; remove the surface mean
    // so the system stays compatible with the constant pressure mode
    let w = pressure_basis_integrals(ctx)?;
    let mean = gvec.iter().sum::<f64>() / w.iter().sum::<f64>();
    gvec.iter_mut().zip(&w).for_each(|(g, wi)| *g -= mean * wi);
    Ok((fvec, gvec))
}

/// Surface integrals `∫ ψ_i` of the pressure basis (`M0·1`).
pub fn pressure_basis_integrals(ctx: &FormContext<'_>) -> Result<Vec<f64>> {
    let np = ctx.pres.local_count();
    assemble_vector(ctx.mode, ctx.pres, |k, out| {
        ctx.cut.for_each_point(ctx.band, k, |sp| {
            let b = ctx.pres.eval_bary(k, &sp.bary);
            for i in 0..np {
                out[i] += sp.weight * b.values[i];
            }
        })
    })
}

/// All blocks of one discretization instance.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    /// Pressure stabilization in the (2,2) block.
    pub c: CsrMatrix,
    pub m0: CsrMatrix,
    /// `M★ = M0 + C★`, the pressure norm matrix.
    pub mstar: CsrMatrix,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub stabilization: Stabilization,
    pub mass_stabilization: Stabilization,
}

impl AssembledSystem {
    pub fn velocity_dofs(&self) -> usize {
        self.a.nrows
    }

    pub fn pressure_dofs(&self) -> usize {
        self.b.nrows
    }

    /// `[[A, Bᵀ], [B, −C]]`.
    pub fn block_matrix(&self) -> Result<CsrMatrix> {
        let bt = self.b.transpose();
        let mc = self.c.scaled(-1.0);
        CsrMatrix::block(&[
            vec![Some(&self.a), Some(&bt)],
            vec![Some(&self.b), Some(&mc)],
        ])
    }
}

/// Assembles every block. `mass_stab` selects the stabilization added to
/// `M0` for `M★`; it may differ from `stab` (e.g. `C★ = 0` with `M_n`).
pub fn assemble_system(
    ctx: &FormContext<'_>,
    params: &FormParameters,
    stab: Stabilization,
    mass_stab: Stabilization,
    forcing: Option<&Forcing<'_>>,
) -> Result<AssembledSystem> {
    let a = assemble_a(ctx, params)?;
    let b = assemble_b(ctx)?;
    let c = assemble_c(ctx, stab, params.rho_p)?;
    let m0 = assemble_mass(ctx)?;
    let mc = if mass_stab == stab {
        c.clone()
    } else {
        assemble_c(ctx, mass_stab, params.rho_p)?
    };
    let mstar = m0.add_scaled(&mc, 1.0);
    let (f, g) = match forcing {
        Some(fg) => assemble_rhs(ctx, fg)?,
        None => (vec![0.0; a.nrows], vec![0.0; b.nrows]),
    };
    Ok(AssembledSystem {
        a,
        b,
        c,
        m0,
        mstar,
        f,
        g,
        stabilization: stab,
        mass_stabilization: mass_stab,
    })
}
