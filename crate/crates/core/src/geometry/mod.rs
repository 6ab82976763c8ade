//! Level sets, surface frames, the reconstructed surface and quadrature.

pub mod cut;
pub mod diagnostics;
pub mod levelset;
pub mod quadrature;

pub use cut::{
    default_subdivision, extract_band_for_subdivision, extract_cut_surface,
    extract_cut_surface_with, BandQuadrature, CutSurface, SurfacePoint, TetPatch,
};
pub use diagnostics::{check_mesh_assumption, DiagnosticReport, TetDiagnostic};
pub use levelset::{eval_frame, projector, LevelSet, SurfaceFrame};
