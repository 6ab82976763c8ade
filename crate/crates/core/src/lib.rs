//! Trace finite elements for the surface Stokes problem.

pub mod ad;
pub mod assembly;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod fem;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod par;
pub mod solvers;

pub use error::{Error, Result};
