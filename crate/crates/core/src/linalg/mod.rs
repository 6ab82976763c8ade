//! Sparse storage, factorizations and small dense helpers.

pub mod dense;
pub mod factor;
pub mod sparse;

pub use factor::{LuFactor, QuasiDefiniteFactor, SpdFactor};
pub use sparse::{CsrMatrix, PatternBuilder};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y ← y + s·x`
#[inline]
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}
