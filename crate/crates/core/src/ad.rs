//! Forward-mode automatic differentiation with nestable dual numbers.
//!
//! `Dual<f64>` carries a value and one directional derivative. Nesting
//! (`Dual<Dual<f64>>`, ...) yields mixed higher derivatives, which is how the
//! manufactured forcing terms are differentiated through the normal field.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Arithmetic needed by the closed-form fields that get differentiated.
pub trait Scalar:
    Copy
    + fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
{
    fn cst(v: f64) -> Self;
    /// Primal (innermost) value.
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
    fn scale(self, s: f64) -> Self {
        self * Self::cst(s)
    }
    fn powi(self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc *= self;
        }
        acc
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

/// A first-order dual number `re + eps·ε`, `ε² = 0`.
#[derive(Clone, Copy, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }

    /// A seeded variable: derivative one in the active direction.
    pub fn var(re: T) -> Self {
        Dual { re, eps: T::one() }
    }

    pub fn constant(re: T) -> Self {
        Dual { re, eps: T::zero() }
    }
}

impl<T: fmt::Debug> fmt::Debug for Dual<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?} + {:?}ε)", self.re, self.eps)
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Dual {
            re: self.re + o.re,
            eps: self.eps + o.eps,
        }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Dual {
            re: self.re - o.re,
            eps: self.eps - o.eps,
        }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Dual {
            re: self.re * o.re,
            eps: self.re * o.eps + self.eps * o.re,
        }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.re;
        let re = self.re * inv;
        Dual {
            re,
            eps: (self.eps - re * o.eps) * inv,
        }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual {
            re: -self.re,
            eps: -self.eps,
        }
    }
}

impl<T: Scalar> AddAssign for Dual<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> SubAssign for Dual<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Scalar> MulAssign for Dual<T> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    #[inline]
    fn cst(v: f64) -> Self {
        Dual::constant(T::cst(v))
    }
    #[inline]
    fn re(&self) -> f64 {
        self.re.re()
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual {
            re: s,
            eps: self.eps / (s + s),
        }
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        Dual {
            re: self.re.scale(s),
            eps: self.eps.scale(s),
        }
    }
}

pub type Vec3<S> = [S; 3];
pub type Mat3<S> = [[S; 3]; 3];

/// Lifts a point into the dual domain seeded along coordinate `dir`.
pub fn seed<S: Scalar>(x: &Vec3<S>, dir: usize) -> Vec3<Dual<S>> {
    std::array::from_fn(|i| {
        if i == dir {
            Dual::var(x[i])
        } else {
            Dual::constant(x[i])
        }
    })
}

/// Gradient of a scalar field, one forward sweep per coordinate.
pub fn gradient<S, F>(f: F, x: &Vec3<S>) -> Vec3<S>
where
    S: Scalar,
    F: Fn(&Vec3<Dual<S>>) -> Dual<S>,
{
    std::array::from_fn(|k| f(&seed(x, k)).eps)
}

/// Jacobian `J[i][k] = ∂f_i/∂x_k` of a vector field.
pub fn jacobian<S, F>(f: F, x: &Vec3<S>) -> Mat3<S>
where
    S: Scalar,
    F: Fn(&Vec3<Dual<S>>) -> Vec3<Dual<S>>,
{
    let mut jac = [[S::zero(); 3]; 3];
    for k in 0..3 {
        let v = f(&seed(x, k));
        for i in 0..3 {
            jac[i][k] = v[i].eps;
        }
    }
    jac
}

/// Hessian of a scalar field via nested duals.
pub fn hessian<F>(f: F, x: &Vec3<f64>) -> Mat3<f64>
where
    F: Fn(&Vec3<Dual<Dual<f64>>>) -> Dual<Dual<f64>>,
{
    let mut h = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let p: Vec3<Dual<Dual<f64>>> = std::array::from_fn(|k| {
                let inner = if k == j {
                    Dual::var(x[k])
                } else {
                    Dual::constant(x[k])
                };
                if k == i {
                    Dual::new(inner, Dual::constant(1.0))
                } else {
                    Dual::constant(inner)
                }
            });
            let v = f(&p).eps.eps;
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    h
}

#[inline]
pub fn dot<S: Scalar>(a: &Vec3<S>, b: &Vec3<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
