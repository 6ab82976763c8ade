//! End-to-end experiment families and their tabular reports.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod runs;

pub use config::ExperimentConfig;
pub use pipeline::{Discretization, Pair, Surface};
pub use report::{config_from_csv, Cell, ExperimentReport, FORMAT_VERSION};
pub use runs::{
    diagnose, eoc, resolution_warnings, run_convergence, run_infsup, run_shift_study, spread,
    ConvergenceRow, ConvergenceStudy, DiagnosticRow, ErrorNorm, InfsupRow, InfsupStudy,
};
