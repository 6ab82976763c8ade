//! Manufactured solution, its forcing data and discrete error norms.

use serde::Serialize;

use crate::ad::{self, Dual, Mat3, Scalar, Vec3};
use crate::fem::FEFunction;
use crate::geometry::{CutSurface, LevelSet};
use crate::mesh::{ActiveBand, Point};
use crate::{Error, Result};

/// `u = P ũ`, `ũ = (−z², y, x)`, and `p = x y² + z`, posed on the zero set
/// of a level set (the unit sphere in the experiments).
#[derive(Debug, Clone)]
pub struct ManufacturedSolution {
    pub phi: LevelSet,
}

fn tilde_u<S: Scalar>(x: &Vec3<S>) -> Vec3<S> {
    [-(x[2] * x[2]), x[1], x[0]]
}

fn tilde_p<S: Scalar>(x: &Vec3<S>) -> S {
    x[0] * x[1] * x[1] + x[2]
}

fn projector<S: Scalar>(n: &Vec3<S>) -> Mat3<S> {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| if i == j { S::one() } else { S::zero() } - n[i] * n[j])
    })
}

fn mat_mul<S: Scalar>(a: &Mat3<S>, b: &Mat3<S>) -> Mat3<S> {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j])
    })
}

fn mat_vec<S: Scalar>(a: &Mat3<S>, v: &Vec3<S>) -> Vec3<S> {
    std::array::from_fn(|i| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2])
}

/// Velocity, pressure and their surface derivatives at a point of Γ.
#[derive(Debug, Clone, Copy)]
pub struct ExactValues {
    pub u: [f64; 3],
    pub p: f64,
    /// `(∇u) P`.
    pub grad_u: [[f64; 3]; 3],
    pub n: [f64; 3],
}

impl ManufacturedSolution {
    pub fn sphere() -> Self {
        ManufacturedSolution {
            phi: LevelSet::sphere(),
        }
    }

    /// `P(x) ũ(x)` as a field on ℝ³.
    pub fn velocity_field<S: Scalar>(&self, x: &Vec3<S>) -> Vec3<S> {
        let n = self.phi.normal(x);
        mat_vec(&projector(&n), &tilde_u(x))
    }

    pub fn pressure_field<S: Scalar>(&self, x: &Vec3<S>) -> S {
        tilde_p(x)
    }

    /// `E_s(u) = ½(P∇uP + (P∇uP)ᵀ)` as a field on ℝ³.
    pub fn strain_field<S: Scalar>(&self, x: &Vec3<S>) -> Mat3<S> {
        let j = ad::jacobian(|y| self.velocity_field(y), x);
        let p = projector(&self.phi.normal(x));
        let pjp = mat_mul(&mat_mul(&p, &j), &p);
        std::array::from_fn(|i| std::array::from_fn(|k| (pjp[i][k] + pjp[k][i]).scale(0.5)))
    }

    /// Exact data at a point already on Γ.
    pub fn on_surface(&self, y: &Point) -> ExactValues {
        let u = self.velocity_field(y);
        let j = ad::jacobian(|z| self.velocity_field(z), y);
        let n = self.phi.normal(y);
        let p = projector(&n);
        ExactValues {
            u,
            p: tilde_p(y),
            grad_u: mat_mul(&j, &p),
            n,
        }
    }

    /// Exact `(u, p)` at the closest point of Γ.
    pub fn eval_exact(&self, x: &Point) -> Result<([f64; 3], f64)> {
        let y = self.phi.project(x)?;
        Ok((self.velocity_field(&y), tilde_p(&y)))
    }

    /// `f = −2P div_Γ E_s(u) + u + P∇p` and `g = tr(P∇u)` at a point of Γ.
    pub fn forcing_on_surface(&self, y: &Point) -> ([f64; 3], f64) {
        let n = self.phi.normal(y);
        let p = projector(&n);
        // ∂_k E_ij from one seeded sweep per direction
        let de: [Mat3<f64>; 3] = std::array::from_fn(|k| {
            let e = self.strain_field::<Dual<f64>>(&ad::seed(y, k));
            std::array::from_fn(|i| std::array::from_fn(|j| e[i][j].eps))
        });
        let div: [f64; 3] = std::array::from_fn(|i| {
            let mut s = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    s += de[k][i][j] * p[k][j];
                }
            }
            s
        });
        let pdiv = mat_vec(&p, &div);
        let u = self.velocity_field(y);
        let gp = ad::gradient(|z| tilde_p(z), y);
        let pgp = mat_vec(&p, &gp);
        let f = std::array::from_fn(|i| -2.0 * pdiv[i] + u[i] + pgp[i]);
        let j = ad::jacobian(|z| self.velocity_field(z), y);
        let g = (0..3)
            .map(|i| (0..3).map(|k| p[i][k] * j[k][i]).sum::<f64>())
            .sum();
        (f, g)
    }

    /// Forcing at the closest-point projection of `x` (normal-constant extension).
    pub fn eval_forcing(&self, x: &Point) -> Result<([f64; 3], f64)> {
        let y = self.phi.project(x)?;
        Ok(self.forcing_on_surface(&y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    /// `‖u* − (u_h)_T‖₁`, gradient part `(∇·)P`.
    pub h1_u: f64,
    /// `‖u* − (u_h)_T‖_{L²}`.
    pub l2_u: f64,
    /// Mean-corrected `‖p* − p_h‖_{L²}`.
    pub l2_p: f64,
    /// `‖u_h·n‖_{L²}`.
    pub l2_un: f64,
}

/// Error norms by quadrature on the integration surface.
pub fn compute_errors(
    exact: &ManufacturedSolution,
    band: &ActiveBand,
    cut: &CutSurface,
    u_h: &FEFunction<'_>,
    p_h: &FEFunction<'_>,
) -> Result<ErrorReport> {
    if u_h.space.components != 3 || p_h.space.components != 1 {
        return Err(Error::Usage(
            "error norms need a vector velocity and a scalar pressure".into(),
        ));
    }
    let mut l2_u = 0.0;
    let mut h1 = 0.0;
    let mut un = 0.0;
    let mut area = 0.0;
    let mut dp_int = 0.0;
    let mut dp_sq = 0.0;
    let mut failure = None;
    for k in 0..band.len() {
        cut.for_each_point(band, k, |sp| {
            let y = match exact.phi.project(&sp.x) {
                Ok(y) => y,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            };
            let ex = exact.on_surface(&y);
            let (uh, ju) = u_h.eval_vector(k, &sp.bary);
            let (ph, _) = p_h.eval_component(k, &sp.bary, 0);
            let fr = &sp.frame;
            let n = &fr.n;
            let uhn = uh[0] * n[0] + uh[1] * n[1] + uh[2] * n[2];
            let hu: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| fr.h[i][j] * uh[j]).sum());
            let w = sp.weight;
            for i in 0..3 {
                let uht = uh[i] - uhn * n[i];
                l2_u += w * (ex.u[i] - uht).powi(2);
                for j in 0..3 {
                    // ∇(P u_h) P = P ∇u_h P − (u_h·n) H − n (H u_h)ᵀ
                    let pgp: f64 = (0..3)
                        .map(|a| {
                            (0..3)
                                .map(|b| fr.p[i][a] * ju[a][b] * fr.p[b][j])
                                .sum::<f64>()
                        })
                        .sum();
                    let gt = pgp - uhn * fr.h[i][j] - n[i] * hu[j];
                    h1 += w * (ex.grad_u[i][j] - gt).powi(2);
                }
            }
            un += w * uhn * uhn;
            let dp = ex.p - ph;
            area += w;
            dp_int += w * dp;
            dp_sq += w * dp * dp;
        })?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
    }
    let mean = dp_int / area;
    // ∫(dp − mean)² = ∫dp² − |Γ| mean²
    let l2_p = (dp_sq - area * mean * mean).max(0.0).sqrt();
    Ok(ErrorReport {
        h1_u: (l2_u + h1).sqrt(),
        l2_u: l2_u.sqrt(),
        l2_p,
        l2_un: un.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_sphere_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| loop {
                let v: Point = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if r > 0.2 && r < 1.0 {
                    break v.map(|c| c / r);
                }
            })
            .collect()
    }

    #[test]
    fn pointwise_values() {
        let s = ManufacturedSolution::sphere();
        let (u, p) = s.eval_exact(&[0.0, 0.0, 1.0]).unwrap();
        assert!((u[0] + 1.0).abs() < 1e-15 && u[1].abs() < 1e-15 && u[2].abs() < 1e-15);
        assert!((p - 1.0).abs() < 1e-15);
        let (u, p) = s.eval_exact(&[1.0, 0.0, 0.0]).unwrap();
        assert!(u[0].abs() < 1e-15 && u[1].abs() < 1e-15 && (u[2] - 1.0).abs() < 1e-15);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn velocity_and_forcing_are_tangential() {
        let s = ManufacturedSolution::sphere();
        for y in random_sphere_points(100, 3) {
            let u = s.velocity_field(&y);
            assert!((u[0] * y[0] + u[1] * y[1] + u[2] * y[2]).abs() < 1e-14);
            let (f, _) = s.forcing_on_surface(&y);
            let fnorm = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
            assert!((f[0] * y[0] + f[1] * y[1] + f[2] * y[2]).abs() <= 1e-10 * (1.0 + fnorm));
        }
    }

    #[test]
    fn divergence_matches_sphere_formula() {
        // on the unit sphere div_Γ(Pũ) = tr(P∇ũ) − 2 ũ·n
        let s = ManufacturedSolution::sphere();
        for y in random_sphere_points(20, 5) {
            let (_, g) = s.forcing_on_surface(&y);
            let gu = [[0.0, 0.0, -2.0 * y[2]], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
            let p = projector(&y);
            let tr: f64 = (0..3)
                .map(|i| (0..3).map(|k| p[i][k] * gu[k][i]).sum::<f64>())
                .sum();
            let ut = tilde_u(&y);
            let expected = tr - 2.0 * (ut[0] * y[0] + ut[1] * y[1] + ut[2] * y[2]);
            assert!((g - expected).abs() < 1e-13);
        }
    }
}
