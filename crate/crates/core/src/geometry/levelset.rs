use serde::{Deserialize, Serialize};

use crate::ad::{Mat3, Scalar, Vec3};
use crate::mesh::Point;
use crate::{Error, Result};

/// Implicit surfaces `Γ = {φ = 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LevelSet {
    /// `φ(x) = ‖x‖² − radius²`.
    Sphere { radius: f64 },
    /// `φ(x) = (‖x‖² + R² − r²)² − 4R²(x² + y²)`.
    Torus { major: f64, minor: f64 },
    /// `φ_base(x − offset)`.
    Shifted {
        base: Box<LevelSet>,
        offset: [f64; 3],
    },
}

impl LevelSet {
    pub fn sphere() -> Self {
        LevelSet::Sphere { radius: 1.0 }
    }

    pub fn torus() -> Self {
        LevelSet::Torus {
            major: 1.0,
            minor: 0.2,
        }
    }

    /// Translates the surface by `amount · direction/‖direction‖`.
    pub fn shifted(self, direction: [f64; 3], amount: f64) -> Result<Self> {
        let len = (direction[0].powi(2) + direction[1].powi(2) + direction[2].powi(2)).sqrt();
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::Config(
                "shift direction must be a nonzero finite vector".into(),
            ));
        }
        if amount == 0.0 {
            return Ok(self);
        }
        Ok(LevelSet::Shifted {
            base: Box::new(self),
            offset: direction.map(|d| amount * d / len),
        })
    }

    /// Evaluates φ for any scalar type, so the same formula feeds the
    /// automatic differentiation of derived fields.
    pub fn value<S: Scalar>(&self, x: &Vec3<S>) -> S {
        match self {
            LevelSet::Sphere { radius } => {
                x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - S::cst(radius * radius)
            }
            LevelSet::Torus { major, minor } => {
                let rr = x[0] * x[0] + x[1] * x[1];
                let q = rr + x[2] * x[2] + S::cst(major * major - minor * minor);
                q * q - rr.scale(4.0 * major * major)
            }
            LevelSet::Shifted { base, offset } => {
                let y = [
                    x[0] - S::cst(offset[0]),
                    x[1] - S::cst(offset[1]),
                    x[2] - S::cst(offset[2]),
                ];
                base.value(&y)
            }
        }
    }

    pub fn gradient(&self, x: &Point) -> Point {
        match self {
            LevelSet::Sphere { .. } => x.map(|c| 2.0 * c),
            LevelSet::Torus { major, minor } => {
                let q = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + major * major - minor * minor;
                let r2 = 8.0 * major * major;
                [
                    4.0 * q * x[0] - r2 * x[0],
                    4.0 * q * x[1] - r2 * x[1],
                    4.0 * q * x[2],
                ]
            }
            LevelSet::Shifted { base, offset } => base.gradient(&sub(x, offset)),
        }
    }

    pub fn hessian(&self, x: &Point) -> Mat3<f64> {
        match self {
            LevelSet::Sphere { .. } => [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]],
            LevelSet::Torus { major, minor } => {
                let q = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + major * major - minor * minor;
                let r2 = 8.0 * major * major;
                let mut h = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        h[i][j] = 8.0 * x[i] * x[j];
                    }
                    h[i][i] += 4.0 * q;
                }
                h[0][0] -= r2;
                h[1][1] -= r2;
                h
            }
            LevelSet::Shifted { base, offset } => base.hessian(&sub(x, offset)),
        }
    }

    /// Unit normal `∇φ/‖∇φ‖` for any scalar type (used by differentiated fields).
    pub fn normal<S: Scalar>(&self, x: &Vec3<S>) -> Vec3<S> {
        let g = crate::ad::gradient(|y| self.value(y), x);
        let len = crate::ad::dot(&g, &g).sqrt();
        g.map(|c| c / len)
    }

    /// Newton projection onto the zero set along the gradient.
    pub fn project(&self, x: &Point) -> Result<Point> {
        let mut y = *x;
        for _ in 0..10 {
            let v = self.value(&y);
            let g = self.gradient(&y);
            let gg = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
            if gg < 1e-20 {
                return Err(Error::Geometry(format!(
                    "vanishing gradient while projecting {x:?}"
                )));
            }
            let step = g.map(|c| v * c / gg);
            y = sub(&y, &step);
            let len = (step[0] * step[0] + step[1] * step[1] + step[2] * step[2]).sqrt();
            if len <= 1e-15 * (1.0 + (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt()) {
                return Ok(y);
            }
        }
        let v = self.value(&y);
        if v.abs() < 1e-13 {
            Ok(y)
        } else {
            Err(Error::Geometry(format!(
                "closest-point projection of {x:?} did not converge"
            )))
        }
    }
}

fn sub(a: &Point, b: &[f64; 3]) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Normal, tangential projector and Weingarten map at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFrame {
    pub n: [f64; 3],
    pub p: Mat3<f64>,
    /// `P ∇²φ P / ‖∇φ‖`, symmetric and annihilating `n`.
    pub h: Mat3<f64>,
}

impl SurfaceFrame {
    pub fn from_normal_and_weingarten(n: [f64; 3], h: Mat3<f64>) -> Self {
        SurfaceFrame {
            n,
            p: projector(&n),
            h,
        }
    }
}

pub fn projector(n: &[f64; 3]) -> Mat3<f64> {
    let mut p = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            p[i][j] = if i == j { 1.0 } else { 0.0 } - n[i] * n[j];
        }
    }
    p
}

/// Frame from the exact first and second derivatives of φ.
pub fn eval_frame(phi: &LevelSet, x: &Point) -> Result<SurfaceFrame> {
    let g = phi.gradient(x);
    let len = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    if !(len > 1e-10) {
        return Err(Error::Geometry(format!(
            "level-set gradient vanishes at {x:?}"
        )));
    }
    let n = g.map(|c| c / len);
    let p = projector(&n);
    let hess = phi.hessian(x);
    let mut ph = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            ph[i][j] = (0..3).map(|k| p[i][k] * hess[k][j]).sum();
        }
    }
    let mut h = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            h[i][j] = (0..3).map(|k| ph[i][k] * p[k][j]).sum::<f64>() / len;
        }
    }
    // symmetrize away round-off
    for i in 0..3 {
        for j in i + 1..3 {
            let s = 0.5 * (h[i][j] + h[j][i]);
            h[i][j] = s;
            h[j][i] = s;
        }
    }
    Ok(SurfaceFrame { n, p, h })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_set_values() {
        let s = LevelSet::sphere();
        assert_eq!(s.value(&[1.0, 0.0, 0.0]), 0.0);
        assert_eq!(s.value(&[0.0, 0.0, 0.0]), -1.0);
        let t = LevelSet::torus();
        assert!(t.value(&[1.2, 0.0, 0.0]).abs() < 1e-14);
        assert!(t.value(&[1.0, 0.0, 0.2]).abs() < 1e-14);
    }

    #[test]
    fn shift_translates() {
        let s = LevelSet::sphere().shifted([1.0, 1.0, 1.0], 0.3).unwrap();
        let d = 0.3 / 3f64.sqrt();
        let x = [0.4, -0.2, 0.9];
        let y = [x[0] - d, x[1] - d, x[2] - d];
        assert!((s.value(&x) - LevelSet::sphere().value(&y)).abs() < 1e-15);
        assert!(LevelSet::sphere().shifted([0.0; 3], 0.1).is_err());
    }

    #[test]
    fn sphere_frame_at_pole() {
        let f = eval_frame(&LevelSet::sphere(), &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(f.n, [0.0, 0.0, 1.0]);
        assert_eq!(f.p, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]);
        assert!(eval_frame(&LevelSet::sphere(), &[0.0; 3]).is_err());
    }

    #[test]
    fn torus_outer_equator_normal() {
        let f = eval_frame(&LevelSet::torus(), &[1.2, 0.0, 0.0]).unwrap();
        assert!((f.n[0] - 1.0).abs() < 1e-15 && f.n[1].abs() < 1e-15 && f.n[2].abs() < 1e-15);
    }

    #[test]
    fn closed_form_derivatives_match_ad() {
        let pts = [[0.3, -0.8, 0.5], [1.1, 0.1, -0.15], [-0.7, 0.6, 0.2]];
        for phi in [
            LevelSet::sphere(),
            LevelSet::torus(),
            LevelSet::torus().shifted([0.0, 1.0, 2.0], 0.4).unwrap(),
        ] {
            for x in &pts {
                let g = phi.gradient(x);
                let g_ad = crate::ad::gradient(|y| phi.value(y), x);
                let h = phi.hessian(x);
                let h_ad = crate::ad::hessian(|y| phi.value(y), x);
                for i in 0..3 {
                    assert!((g[i] - g_ad[i]).abs() < 1e-12 * (1.0 + g[i].abs()));
                    for j in 0..3 {
                        assert!((h[i][j] - h_ad[i][j]).abs() < 1e-11 * (1.0 + h[i][j].abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn projection_lands_on_surface() {
        let t = LevelSet::torus();
        let y = t.project(&[1.25, 0.05, 0.03]).unwrap();
        assert!(t.value(&y).abs() < 1e-13);
        let s = LevelSet::sphere();
        let y = s.project(&[0.0, 0.6, 0.9]).unwrap();
        let r = (0.36f64 + 0.81).sqrt();
        assert!((y[1] - 0.6 / r).abs() < 1e-14 && (y[2] - 0.9 / r).abs() < 1e-14);
    }
}
