use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracestokes::assembly::{
    assemble_a, assemble_b, assemble_c, assemble_mass, FormContext, FormParameters, FormVariant,
    Stabilization,
};
use tracestokes::fem::{build_space, interpolate_vector, DiscreteSpace};
use tracestokes::geometry::quadrature::{tet_degree5, triangle_degree4};
use tracestokes::geometry::{extract_cut_surface, CutSurface, LevelSet};
use tracestokes::linalg::CsrMatrix;
use tracestokes::mesh::{build_mesh, extract_active_band, ActiveBand, Point};
use tracestokes::par::ExecMode;

pub type M3 = [[f64; 3]; 3];

/// Monomial basis of degree ≤ 2 and its gradient.
pub fn monomials(x: &Point, degree: usize) -> (Vec<f64>, Vec<[f64; 3]>) {
    let [a, b, c] = *x;
    let mut v = vec![1.0, a, b, c];
    let mut g = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    if degree == 2 {
        v.extend([a * a, b * b, c * c, a * b, a * c, b * c]);
        g.extend([
            [2.0 * a, 0.0, 0.0],
            [0.0, 2.0 * b, 0.0],
            [0.0, 0.0, 2.0 * c],
            [b, a, 0.0],
            [c, 0.0, a],
            [0.0, c, b],
        ]);
    }
    (v, g)
}

/// Lagrange basis of tet `k` from a Vandermonde solve on the node coordinates.
pub struct NaiveBasis {
    pub coeffs: DMatrix<f64>,
    pub degree: usize,
}

impl NaiveBasis {
    fn new(space: &DiscreteSpace, k: usize) -> Self {
        let nodes = space.local_nodes(k);
        let n = nodes.len();
        let v = DMatrix::from_fn(n, n, |i, j| {
            monomials(&space.node_coords[nodes[i]], space.degree).0[j]
        });
        NaiveBasis {
            coeffs: v.try_inverse().unwrap(),
            degree: space.degree,
        }
    }

    /// Values and gradients of all local basis functions at `x`.
    fn eval(&self, x: &Point) -> (Vec<f64>, Vec<[f64; 3]>) {
        let (m, g) = monomials(x, self.degree);
        let n = m.len();
        let vals = (0..n)
            .map(|a| (0..n).map(|j| m[j] * self.coeffs[(j, a)]).sum())
            .collect();
        let grads = (0..n)
            .map(|a| std::array::from_fn(|d| (0..n).map(|j| g[j][d] * self.coeffs[(j, a)]).sum()))
            .collect();
        (vals, grads)
    }
}

/// Sphere geometry written out directly: `n = x/|x|`, `H = P/|x|`.
pub fn sphere_frame(x: &Point) -> ([f64; 3], M3, M3) {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let n = x.map(|c| c / r);
    let p: M3 =
        std::array::from_fn(|i| std::array::from_fn(|j| f64::from(u8::from(i == j)) - n[i] * n[j]));
    let h = p.map(|row| row.map(|v| v / r));
    (n, p, h)
}

pub fn mm(a: &M3, b: &M3) -> M3 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

pub fn ddot(a: &M3, b: &M3) -> f64 {
    (0..3)
        .map(|i| (0..3).map(|j| a[i][j] * b[i][j]).sum::<f64>())
        .sum()
}

pub struct Pt {
    pub x: Point,
    pub w: f64,
}

pub fn surface_points(cut: &CutSurface, k: usize) -> Vec<Pt> {
    let mut out = Vec::new();
    for t in &cut.patches[k].triangles {
        let e1: [f64; 3] = std::array::from_fn(|c| t[1][c] - t[0][c]);
        let e2: [f64; 3] = std::array::from_fn(|c| t[2][c] - t[0][c]);
        let cr = [
            e1[1] * e2[2] - e1[2] * e2[1],
            e1[2] * e2[0] - e1[0] * e2[2],
            e1[0] * e2[1] - e1[1] * e2[0],
        ];
        let area = 0.5 * (cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]).sqrt();
        for (l, w) in triangle_degree4() {
            out.push(Pt {
                x: std::array::from_fn(|c| l[0] * t[0][c] + l[1] * t[1][c] + l[2] * t[2][c]),
                w: w * area,
            });
        }
    }
    out
}

pub fn volume_points(band: &ActiveBand, k: usize) -> Vec<Pt> {
    let t = band.tet_points(k);
    let e: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|c| t[i + 1][c] - t[0][c]));
    let det = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
        - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
        + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]);
    tet_degree5()
        .iter()
        .map(|(l, w)| Pt {
            x: std::array::from_fn(|c| (0..4).map(|i| l[i] * t[i][c]).sum()),
            w: w * det.abs() / 6.0,
        })
        .collect()
}

/// `2(E(u) − u_N H) : (E(v) − v_N H)` style velocity form, entry by entry.
pub fn naive_a(
    band: &ActiveBand,
    cut: &CutSurface,
    vel: &DiscreteSpace,
    params: &FormParameters,
) -> DMatrix<f64> {
    let nd = vel.dof_count();
    let mut out = DMatrix::zeros(nd, nd);
    let consistent = params.variant == FormVariant::Consistent;
    for k in 0..band.len() {
        let basis = NaiveBasis::new(vel, k);
        let nodes = vel.local_nodes(k);
        for pt in surface_points(cut, k) {
            let (n, p, h) = sphere_frame(&pt.x);
            let (vals, grads) = basis.eval(&pt.x);
            // vector basis φ_a e_c: value, strain and normal component
            let mut shapes = Vec::new();
            for (a, &node) in nodes.iter().enumerate() {
                for c in 0..3 {
                    let grad: M3 = std::array::from_fn(|i| {
                        std::array::from_fn(|j| if i == c { grads[a][j] } else { 0.0 })
                    });
                    let sym: M3 = std::array::from_fn(|i| {
                        std::array::from_fn(|j| 0.5 * (grad[i][j] + grad[j][i]))
                    });
                    let mut e = mm(&mm(&p, &sym), &p);
                    let un = vals[a] * n[c];
                    if consistent {
                        e = std::array::from_fn(|i| {
                            std::array::from_fn(|j| e[i][j] - un * h[i][j])
                        });
                    }
                    let mut val = [0.0; 3];
                    val[c] = vals[a];
                    shapes.push((node * 3 + c, val, e, un));
                }
            }
            for (r, vr, er, nr) in &shapes {
                for (s, vs, es, ns) in &shapes {
                    let v = 2.0 * ddot(er, es)
                        + (0..3).map(|i| vr[i] * vs[i]).sum::<f64>()
                        + params.tau * nr * ns;
                    out[(*r, *s)] += pt.w * v;
                }
            }
        }
        for pt in volume_points(band, k) {
            let (n, _, _) = sphere_frame(&pt.x);
            let (_, grads) = basis.eval(&pt.x);
            for (a, &na) in nodes.iter().enumerate() {
                for (b, &nb) in nodes.iter().enumerate() {
                    let da: f64 = (0..3).map(|i| grads[a][i] * n[i]).sum();
                    let db: f64 = (0..3).map(|i| grads[b][i] * n[i]).sum();
                    for c in 0..3 {
                        out[(na * 3 + c, nb * 3 + c)] += pt.w * params.rho_u * da * db;
                    }
                }
            }
        }
    }
    out
}

pub fn naive_b(
    band: &ActiveBand,
    cut: &CutSurface,
    vel: &DiscreteSpace,
    pres: &DiscreteSpace,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(pres.dof_count(), vel.dof_count());
    for k in 0..band.len() {
        let (bv, bp) = (NaiveBasis::new(vel, k), NaiveBasis::new(pres, k));
        for pt in surface_points(cut, k) {
            let (_, p, _) = sphere_frame(&pt.x);
            let (vv, _) = bv.eval(&pt.x);
            let (_, gp) = bp.eval(&pt.x);
            for (i, &ni) in pres.local_nodes(k).iter().enumerate() {
                let sg: [f64; 3] =
                    std::array::from_fn(|c| (0..3).map(|j| p[c][j] * gp[i][j]).sum());
                for (a, &na) in vel.local_nodes(k).iter().enumerate() {
                    for c in 0..3 {
                        out[(ni, na * 3 + c)] += pt.w * vv[a] * sg[c];
                    }
                }
            }
        }
    }
    out
}

pub fn naive_pressure(
    band: &ActiveBand,
    cut: &CutSurface,
    pres: &DiscreteSpace,
    kind: Option<Stabilization>,
    rho_p: f64,
) -> DMatrix<f64> {
    let np = pres.dof_count();
    let mut out = DMatrix::zeros(np, np);
    for k in 0..band.len() {
        let b = NaiveBasis::new(pres, k);
        let nodes = pres.local_nodes(k);
        let pts = match kind {
            None => surface_points(cut, k),
            Some(_) => volume_points(band, k),
        };
        for pt in pts {
            let (n, _, _) = sphere_frame(&pt.x);
            let (v, g) = b.eval(&pt.x);
            for (i, &ni) in nodes.iter().enumerate() {
                for (j, &nj) in nodes.iter().enumerate() {
                    let val = match kind {
                        None => v[i] * v[j],
                        Some(Stabilization::Normal) => {
                            rho_p
                                * (0..3).map(|c| g[i][c] * n[c]).sum::<f64>()
                                * (0..3).map(|c| g[j][c] * n[c]).sum::<f64>()
                        }
                        Some(Stabilization::Full) => {
                            rho_p * (0..3).map(|c| g[i][c] * g[j][c]).sum::<f64>()
                        }
                        Some(Stabilization::None) => 0.0,
                    };
                    out[(ni, nj)] += pt.w * val;
                }
            }
        }
    }
    out
}

/// Entry-wise comparison; entries that cancel to rounding level are
/// measured against a small fraction of the largest entry.
pub fn mismatch(got: &CsrMatrix, want: &DMatrix<f64>) -> f64 {
    assert_eq!((got.nrows, got.ncols), want.shape());
    let scale = want.amax();
    let mut worst = 0.0f64;
    for r in 0..want.nrows() {
        for c in 0..want.ncols() {
            let (g, w) = (got.get(r, c), want[(r, c)]);
            worst = worst.max((g - w).abs() / w.abs().max(1e-3 * scale));
        }
    }
    worst
}

pub fn assert_matches(name: &str, got: &CsrMatrix, want: &DMatrix<f64>) {
    let e = mismatch(got, want);
    assert!(e <= 1e-12, "{name}: relative mismatch {e:e}");
}

pub struct Tiny {
    pub band: ActiveBand,
    pub cut: CutSurface,
    pub vel: DiscreteSpace,
    pub pres: DiscreteSpace,
}

pub fn tiny_band(m: usize) -> Tiny {
    let phi = LevelSet::sphere();
    let mesh = Arc::new(build_mesh(1, Some(&phi)).unwrap());
    let full = extract_active_band(mesh.clone(), &phi).unwrap();
    let picked: Vec<usize> = full.cut_tets.iter().step_by(17).take(5).copied().collect();
    let band = ActiveBand::from_tets(mesh, picked).unwrap();
    let cut = extract_cut_surface(&band, &phi, m).unwrap();
    let vel = build_space(&band, 2, 3).unwrap();
    let pres = build_space(&band, 1, 1).unwrap();
    Tiny {
        band,
        cut,
        vel,
        pres,
    }
}

pub struct Level {
    pub band: ActiveBand,
    pub cut: CutSurface,
    pub vel: DiscreteSpace,
    pub pres: DiscreteSpace,
}

pub fn sphere_level(level: u32) -> Level {
    let phi = LevelSet::sphere();
    let d = tracestokes::experiments::Discretization::build(
        &phi,
        level,
        tracestokes::experiments::Pair::P2P1,
        None,
        ExecMode::Parallel,
    )
    .unwrap();
    Level {
        band: d.band,
        cut: d.cut,
        vel: d.vel,
        pres: d.pres,
    }
}

pub fn quad(a: &CsrMatrix, v: &[f64]) -> f64 {
    a.mul_vec(v).iter().zip(v).map(|(x, y)| x * y).sum()
}

pub fn tiny_context(t: &Tiny, mode: ExecMode) -> FormContext<'_> {
    FormContext {
        band: &t.band,
        cut: &t.cut,
        vel: &t.vel,
        pres: &t.pres,
        mode,
    }
}

/// Worst entry-wise relative mismatch between the library forms and the
/// naive quadrature over A (both variants), B, C_n, C_full and M0, for
/// surface sub-refinements 1 and 2 of a band of at most five tets.
pub fn oracle_mismatch() -> f64 {
    let mut worst = 0.0f64;
    for m in [1, 2] {
        let t = tiny_band(m);
        assert!(t.band.len() <= 5 && t.cut.triangle_count() > 0);
        let ctx = tiny_context(&t, ExecMode::Sequential);
        let h = t.band.h();
        for variant in [FormVariant::Inconsistent, FormVariant::Consistent] {
            let params = FormParameters::scaled(h, 1.0, 1.0, -1, 1.0, variant);
            let a = assemble_a(&ctx, &params).unwrap();
            worst = worst.max(mismatch(&a, &naive_a(&t.band, &t.cut, &t.vel, &params)));
        }
        let b = assemble_b(&ctx).unwrap();
        worst = worst.max(mismatch(&b, &naive_b(&t.band, &t.cut, &t.vel, &t.pres)));
        let rho_p = h;
        for s in [Stabilization::Normal, Stabilization::Full] {
            let c = assemble_c(&ctx, s, rho_p).unwrap();
            worst = worst.max(mismatch(
                &c,
                &naive_pressure(&t.band, &t.cut, &t.pres, Some(s), rho_p),
            ));
        }
        let zero = assemble_c(&ctx, Stabilization::None, rho_p).unwrap();
        worst = worst.max(zero.max_abs());
        let m0 = assemble_mass(&ctx).unwrap();
        worst = worst.max(mismatch(
            &m0,
            &naive_pressure(&t.band, &t.cut, &t.pres, None, rho_p),
        ));
    }
    worst
}

pub fn level_context(l: &Level) -> FormContext<'_> {
    FormContext {
        band: &l.band,
        cut: &l.cut,
        vel: &l.vel,
        pres: &l.pres,
        mode: ExecMode::Parallel,
    }
}

/// Extreme ratios `vᵀÃv / vᵀAv` of the consistent and plain velocity forms
/// over `count` random coefficient vectors.
pub fn equivalence_ratios(level: u32, count: usize) -> (f64, f64) {
    let l = sphere_level(level);
    let ctx = level_context(&l);
    let h = l.band.h();
    let plain = assemble_a(
        &ctx,
        &FormParameters::scaled(h, 1.0, 1.0, -1, 1.0, FormVariant::Inconsistent),
    )
    .unwrap();
    let cons = assemble_a(
        &ctx,
        &FormParameters::scaled(h, 1.0, 1.0, -1, 1.0, FormVariant::Consistent),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    (0..count).fold((f64::INFINITY, 0.0f64), |(lo, hi), _| {
        let v: Vec<f64> = (0..plain.nrows)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let r = quad(&cons, &v) / quad(&plain, &v);
        (lo.min(r), hi.max(r))
    })
}

/// Largest `|vᵀAv − ∫|v|²| / ∫|v|²` over interpolated rotations `ω × x`
/// with `τ = ρ_u = 0`, which leaves the strain energy plus the mass term.
pub fn killing_energy(level: u32) -> f64 {
    let l = sphere_level(level);
    let ctx = level_context(&l);
    let params = FormParameters {
        tau: 0.0,
        rho_u: 0.0,
        rho_p: 0.0,
        variant: FormVariant::Inconsistent,
    };
    let a = assemble_a(&ctx, &params).unwrap();
    let mut worst = 0.0f64;
    for omega in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        let field = |x: &Point| {
            [
                omega[1] * x[2] - omega[2] * x[1],
                omega[2] * x[0] - omega[0] * x[2],
                omega[0] * x[1] - omega[1] * x[0],
            ]
        };
        let v = interpolate_vector(&l.vel, field).unwrap();
        let mass = l
            .cut
            .integrate(&l.band, |sp| {
                let f = field(&sp.x);
                f[0] * f[0] + f[1] * f[1] + f[2] * f[2]
            })
            .unwrap();
        worst = worst.max((quad(&a, &v.coeffs) - mass).abs() / mass);
    }
    worst
}
