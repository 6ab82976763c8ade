//! Convergence, inf-sup, shifted-surface and geometry studies.

use std::time::Instant;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::pipeline::{Discretization, Pair, Surface};
use super::report::{Cell, ExperimentReport};
use crate::assembly::{AssembledSystem, Forcing, Stabilization};
use crate::exact::{compute_errors, ErrorReport, ManufacturedSolution};
use crate::fem::FEFunction;
use crate::geometry::{check_mesh_assumption, LevelSet};
use crate::mesh::mesh_size;
use crate::solvers::{infsup_dense, infsup_sparse, solve_saddle, EigenOptions, EigenResult};
use crate::{Error, Result};

/// Elements across the tube below which torus runs are flagged.
pub const MIN_TUBE_ELEMENTS: f64 = 8.0;
/// Patch boundary ratio above which a cut tet is flagged by `diagnose`.
pub const BOUNDARY_RATIO_THRESHOLD: f64 = 6.0;

fn status_of<T>(r: &Result<T>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => e.to_string(),
    }
}

/// Geometric resolution warnings for the configured surface.
pub fn resolution_warnings(surface: Surface, levels: &[u32]) -> Vec<String> {
    let LevelSet::Torus { minor, .. } = surface.level_set() else {
        return Vec::new();
    };
    levels
        .iter()
        .filter_map(|&l| {
            let across = 2.0 * minor / mesh_size(l);
            (across < MIN_TUBE_ELEMENTS).then(|| {
                format!("level {l}: only {across:.1} elements span the torus tube diameter")
            })
        })
        .collect()
}

fn eigen_options(cfg: &ExperimentConfig) -> EigenOptions {
    EigenOptions {
        dense_cap: cfg.dense_cap,
        count: cfg.eigen_count,
        ..EigenOptions::default()
    }
}

// ---------------------------------------------------------------------------
// convergence

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub level: u32,
    pub h: f64,
    pub stabilization: Stabilization,
    pub velocity_dofs: usize,
    pub pressure_dofs: usize,
    pub errors: Option<ErrorReport>,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub config: ExperimentConfig,
    pub rows: Vec<ConvergenceRow>,
    pub warnings: Vec<String>,
}

/// Error quantity tracked in the convergence tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    H1Velocity,
    L2Velocity,
    L2Pressure,
    NormalVelocity,
}

impl ErrorNorm {
    pub const ALL: [ErrorNorm; 4] = [
        ErrorNorm::H1Velocity,
        ErrorNorm::L2Velocity,
        ErrorNorm::L2Pressure,
        ErrorNorm::NormalVelocity,
    ];

    pub fn of(self, e: &ErrorReport) -> f64 {
        match self {
            ErrorNorm::H1Velocity => e.h1_u,
            ErrorNorm::L2Velocity => e.l2_u,
            ErrorNorm::L2Pressure => e.l2_p,
            ErrorNorm::NormalVelocity => e.l2_un,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorNorm::H1Velocity => "h1_u",
            ErrorNorm::L2Velocity => "l2_u",
            ErrorNorm::L2Pressure => "l2_p",
            ErrorNorm::NormalVelocity => "l2_un",
        }
    }
}

/// `log₂(e_{k−1}/e_k)` per level step, `None` for the first level and
/// wherever an error is missing.
pub fn eoc(levels: &[u32], errors: &[Option<f64>]) -> Vec<Option<f64>> {
    (0..errors.len())
        .map(|k| {
            if k == 0 {
                return None;
            }
            let (a, b) = (errors[k - 1]?, errors[k]?);
            let steps = levels[k].checked_sub(levels[k - 1]).filter(|&s| s > 0)? as f64;
            (a > 0.0 && b > 0.0).then(|| (a / b).log2() / steps)
        })
        .collect()
}

impl ConvergenceStudy {
    fn rows_for(&self, stab: Stabilization) -> Vec<&ConvergenceRow> {
        self.rows
            .iter()
            .filter(|r| r.stabilization == stab)
            .collect()
    }

    /// EOC sequence of one norm for one stabilization, aligned with the levels.
    pub fn eoc(&self, stab: Stabilization, norm: ErrorNorm) -> Vec<Option<f64>> {
        let rows = self.rows_for(stab);
        let levels: Vec<u32> = rows.iter().map(|r| r.level).collect();
        let errs: Vec<Option<f64>> = rows
            .iter()
            .map(|r| r.errors.as_ref().map(|e| norm.of(e)))
            .collect();
        eoc(&levels, &errs)
    }

    pub fn iterations(&self, stab: Stabilization) -> Vec<Option<usize>> {
        self.rows_for(stab).iter().map(|r| r.iterations).collect()
    }

    pub fn report(&self) -> ExperimentReport {
        let with_eoc = self.config.levels.len() >= 2;
        let mut columns: Vec<String> = ["level", "h", "stabilization", "n", "m"]
            .into_iter()
            .map(String::from)
            .collect();
        for norm in ErrorNorm::ALL {
            columns.push(norm.label().into());
            if with_eoc {
                columns.push(format!("eoc_{}", norm.label()));
            }
        }
        columns.extend(["iterations", "residual", "status"].map(String::from));
        let stabs = self.config.stabilization_list(&[Stabilization::Normal]);
        let eocs: Vec<Vec<Vec<Option<f64>>>> = stabs
            .iter()
            .map(|&s| ErrorNorm::ALL.iter().map(|&n| self.eoc(s, n)).collect())
            .collect();
        let mut seen = vec![0usize; stabs.len()];
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let si = stabs
                    .iter()
                    .position(|&s| s == r.stabilization)
                    .unwrap_or(0);
                let k = seen[si];
                seen[si] += 1;
                let mut row = vec![
                    Cell::Int(r.level as u64),
                    Cell::Real(r.h),
                    Cell::Text(r.stabilization.label().into()),
                    Cell::Int(r.velocity_dofs as u64),
                    Cell::Int(r.pressure_dofs as u64),
                ];
                for (ni, norm) in ErrorNorm::ALL.iter().enumerate() {
                    row.push(Cell::real(r.errors.as_ref().map(|e| norm.of(e))));
                    if with_eoc {
                        row.push(Cell::real(eocs[si][ni].get(k).copied().flatten()));
                    }
                }
                row.push(r.iterations.map_or(Cell::Empty, |i| Cell::Int(i as u64)));
                row.push(Cell::real(r.residual));
                row.push(Cell::Text(r.status.clone()));
                row
            })
            .collect();
        ExperimentReport {
            kind: "converge".into(),
            config: self.config.clone(),
            warnings: self.warnings.clone(),
            columns,
            rows,
        }
    }
}

fn solve_and_measure(
    disc: &Discretization,
    sys: &AssembledSystem,
    exact: &ManufacturedSolution,
    cfg: &ExperimentConfig,
) -> Result<(ErrorReport, usize, f64)> {
    let sol = solve_saddle(sys, cfg.tol, cfg.maxit)?;
    let u = FEFunction::new(&disc.vel, sol.u)?;
    let p = FEFunction::new(&disc.pres, sol.p)?;
    let errors = compute_errors(exact, &disc.band, &disc.cut, &u, &p)?;
    Ok((errors, sol.iterations, sol.final_residual))
}

/// Manufactured-solution study on the unit sphere.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ConvergenceStudy> {
    if config.surface != Surface::Sphere || config.pair != Pair::P2P1 {
        return Err(Error::Config(
            "the convergence study needs surface = \"sphere\" and pair = \"P2P1\"".into(),
        ));
    }
    let default = [Stabilization::Normal];
    let cfg = config.clone().resolved(&default);
    let stabs = cfg.stabilization_list(&default);
    let exact = ManufacturedSolution::sphere();
    let forcing = |x: &crate::mesh::Point| exact.eval_forcing(x);
    let forcing: &Forcing<'_> = &forcing;
    let phi = cfg
        .surface
        .level_set()
        .shifted(cfg.shift_direction, cfg.shift_alpha)?;
    let mut rows = Vec::new();
    for &level in &cfg.levels {
        let h = mesh_size(level);
        let started = Instant::now();
        let built = Discretization::build(
            &phi,
            level,
            cfg.pair,
            cfg.subdivision_override(),
            cfg.exec_mode(),
        )
        .and_then(|d| {
            let variants: Vec<_> = stabs.iter().map(|&s| (s, cfg.mass_for(s))).collect();
            let systems = d.assemble_variants(&cfg.parameters(h), &variants, Some(forcing))?;
            Ok((d, systems))
        });
        let (disc, systems) = match built {
            Ok(v) => v,
            Err(e) => {
                for &stabilization in &stabs {
                    rows.push(ConvergenceRow {
                        level,
                        h,
                        stabilization,
                        velocity_dofs: 0,
                        pressure_dofs: 0,
                        errors: None,
                        iterations: None,
                        residual: None,
                        status: e.to_string(),
                    });
                }
                continue;
            }
        };
        for sys in &systems {
            let outcome = solve_and_measure(&disc, sys, &exact, &cfg);
            let status = status_of(&outcome);
            let ok = outcome.ok();
            log::info!(
                "converge level {level} {}: {status} after {:.1}s",
                sys.stabilization.label(),
                started.elapsed().as_secs_f64()
            );
            rows.push(ConvergenceRow {
                level,
                h,
                stabilization: sys.stabilization,
                velocity_dofs: sys.velocity_dofs(),
                pressure_dofs: sys.pressure_dofs(),
                errors: ok.map(|v| v.0),
                iterations: ok.map(|v| v.1),
                residual: ok.map(|v| v.2),
                status,
            });
        }
    }
    Ok(ConvergenceStudy {
        warnings: resolution_warnings(cfg.surface, &cfg.levels),
        config: cfg,
        rows,
    })
}

// ---------------------------------------------------------------------------
// inf-sup and shifted surfaces

#[derive(Debug, Clone, Serialize)]
pub struct InfsupRow {
    pub level: u32,
    pub h: f64,
    pub alpha: f64,
    pub stabilization: Stabilization,
    pub mass_stabilization: Stabilization,
    pub velocity_dofs: usize,
    pub pressure_dofs: usize,
    pub sparse: Option<EigenResult>,
    /// Dense cross-check, when the pressure dimension allows it.
    pub dense: Option<EigenResult>,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct InfsupStudy {
    pub kind: &'static str,
    pub config: ExperimentConfig,
    pub rows: Vec<InfsupRow>,
    pub warnings: Vec<String>,
}

/// `max/min` of a positive series, `None` if any entry is missing.
pub fn spread(values: &[Option<f64>]) -> Option<f64> {
    let v: Option<Vec<f64>> = values.iter().copied().collect();
    let v = v?;
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo > 0.0).then(|| hi / lo)
}

impl InfsupStudy {
    /// λ₂ series for one stabilization in row order.
    pub fn lambda2(&self, stab: Stabilization) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .filter(|r| r.stabilization == stab)
            .map(|r| r.sparse.as_ref().map(|e| e.lambda2))
            .collect()
    }

    pub fn report(&self) -> ExperimentReport {
        let shift = self.kind == "shift";
        let mut columns: Vec<String> = vec!["level".into(), "h".into()];
        if shift {
            columns.push("alpha".into());
        }
        columns.extend(
            [
                "stabilization",
                "mass",
                "n",
                "m",
                "lambda1",
                "lambda2",
                "lambda_m",
                "epsilon",
                "krylov_dim",
                "constant_cosine",
                "dense_lambda2",
                "dense_lambda_m",
                "status",
            ]
            .map(String::from),
        );
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![Cell::Int(r.level as u64), Cell::Real(r.h)];
                if shift {
                    row.push(Cell::Real(r.alpha));
                }
                let s = r.sparse.as_ref();
                let d = r.dense.as_ref();
                row.extend([
                    Cell::Text(r.stabilization.label().into()),
                    Cell::Text(r.mass_stabilization.label().into()),
                    Cell::Int(r.velocity_dofs as u64),
                    Cell::Int(r.pressure_dofs as u64),
                    Cell::real(s.map(|e| e.lambda1)),
                    Cell::real(s.map(|e| e.lambda2)),
                    Cell::real(s.map(|e| e.lambda_m)),
                    Cell::real(s.map(|e| e.epsilon)),
                    s.map_or(Cell::Empty, |e| Cell::Int(e.krylov_dim as u64)),
                    Cell::real(s.map(|e| e.constant_cosine)),
                    Cell::real(d.map(|e| e.lambda2)),
                    Cell::real(d.map(|e| e.lambda_m)),
                    Cell::Text(r.status.clone()),
                ]);
                row
            })
            .collect();
        ExperimentReport {
            kind: self.kind.into(),
            config: self.config.clone(),
            warnings: self.warnings.clone(),
            columns,
            rows,
        }
    }
}

/// The eigenvalue tables list `S_0`, `S_n` and `S_full` side by side.
const INFSUP_STABILIZATIONS: [Stabilization; 3] = [
    Stabilization::None,
    Stabilization::Normal,
    Stabilization::Full,
];

/// Eigenvalue rows of one geometry instance, one per stabilization.
fn infsup_rows(cfg: &ExperimentConfig, phi: &LevelSet, level: u32, alpha: f64) -> Vec<InfsupRow> {
    let h = mesh_size(level);
    let stabs = cfg.stabilization_list(&INFSUP_STABILIZATIONS);
    let variants: Vec<_> = stabs.iter().map(|&s| (s, cfg.mass_for(s))).collect();
    let started = Instant::now();
    let built = Discretization::build(
        phi,
        level,
        cfg.pair,
        cfg.subdivision_override(),
        cfg.exec_mode(),
    )
    .and_then(|d| d.assemble_variants(&cfg.parameters(h), &variants, None));
    let systems = match built {
        Ok(s) => s,
        Err(e) => {
            return variants
                .iter()
                .map(|&(stabilization, mass_stabilization)| InfsupRow {
                    level,
                    h,
                    alpha,
                    stabilization,
                    mass_stabilization,
                    velocity_dofs: 0,
                    pressure_dofs: 0,
                    sparse: None,
                    dense: None,
                    status: e.to_string(),
                })
                .collect();
        }
    };
    let opts = eigen_options(cfg);
    systems
        .iter()
        .map(|sys| {
            let sparse = infsup_sparse(sys, cfg.epsilon, &opts);
            let dense = (cfg.dense_check && sys.pressure_dofs() <= cfg.dense_cap)
                .then(|| infsup_dense(sys, &opts));
            let status = match (&sparse, &dense) {
                (Err(e), _) | (_, Some(Err(e))) => e.to_string(),
                _ => "ok".into(),
            };
            log::info!(
                "infsup level {level} alpha {alpha} {}: {status} after {:.1}s",
                sys.stabilization.label(),
                started.elapsed().as_secs_f64()
            );
            InfsupRow {
                level,
                h,
                alpha,
                stabilization: sys.stabilization,
                mass_stabilization: sys.mass_stabilization,
                velocity_dofs: sys.velocity_dofs(),
                pressure_dofs: sys.pressure_dofs(),
                sparse: sparse.ok(),
                dense: dense.and_then(|d| d.ok()),
                status,
            }
        })
        .collect()
}

/// λ₂ and λ_m per level and stabilization.
pub fn run_infsup(config: &ExperimentConfig) -> Result<InfsupStudy> {
    let cfg = config.clone().resolved(&INFSUP_STABILIZATIONS);
    let phi = cfg
        .surface
        .level_set()
        .shifted(cfg.shift_direction, cfg.shift_alpha)?;
    let rows = cfg
        .levels
        .iter()
        .flat_map(|&l| infsup_rows(&cfg, &phi, l, cfg.shift_alpha))
        .collect();
    Ok(InfsupStudy {
        kind: "infsup",
        warnings: resolution_warnings(cfg.surface, &cfg.levels),
        config: cfg,
        rows,
    })
}

/// λ₂ and λ_m on `Γ + α s` for every configured `α` at `shift_level`.
pub fn run_shift_study(config: &ExperimentConfig) -> Result<InfsupStudy> {
    let cfg = config
        .clone()
        .resolved(&[Stabilization::None, Stabilization::Normal]);
    let mut rows = Vec::new();
    for &alpha in &cfg.shift_alphas {
        let phi = cfg
            .surface
            .level_set()
            .shifted(cfg.shift_direction, alpha)?;
        rows.extend(infsup_rows(&cfg, &phi, cfg.shift_level, alpha));
    }
    Ok(InfsupStudy {
        kind: "shift",
        warnings: resolution_warnings(cfg.surface, &[cfg.shift_level]),
        config: cfg,
        rows,
    })
}

// ---------------------------------------------------------------------------
// geometry diagnostics

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticRow {
    pub level: u32,
    pub h: f64,
    pub subdivision: usize,
    pub band_tets: usize,
    pub triangles: usize,
    pub dropped: usize,
    pub area: f64,
    pub area_rel_error: f64,
    pub regular_fraction: f64,
    pub max_components: usize,
    pub max_boundary_ratio: f64,
    pub flagged: usize,
    pub velocity_dofs: usize,
    pub pressure_dofs: usize,
}

/// Mesh, band and surface statistics per level.
pub fn diagnose(config: &ExperimentConfig) -> Result<(ExperimentReport, Vec<DiagnosticRow>)> {
    let cfg = config.clone().resolved(&[Stabilization::Normal]);
    let phi = cfg
        .surface
        .level_set()
        .shifted(cfg.shift_direction, cfg.shift_alpha)?;
    let mut rows = Vec::new();
    for &level in &cfg.levels {
        let d = Discretization::build(
            &phi,
            level,
            cfg.pair,
            cfg.subdivision_override(),
            cfg.exec_mode(),
        )?;
        let diag = check_mesh_assumption(&d.band, &d.cut, BOUNDARY_RATIO_THRESHOLD);
        let area = d.cut.area();
        let exact = cfg.surface.exact_area();
        rows.push(DiagnosticRow {
            level,
            h: d.h(),
            subdivision: d.cut.subdivision,
            band_tets: d.band.len(),
            triangles: d.cut.triangle_count(),
            dropped: d.cut.dropped,
            area,
            area_rel_error: (area - exact).abs() / exact,
            regular_fraction: diag.regular_fraction,
            max_components: diag.max_components,
            max_boundary_ratio: diag.max_boundary_ratio,
            flagged: diag.flagged.len(),
            velocity_dofs: d.vel.dof_count(),
            pressure_dofs: d.pres.dof_count(),
        });
    }
    let columns = [
        "level",
        "h",
        "subdivision",
        "band_tets",
        "triangles",
        "dropped",
        "area",
        "area_rel_error",
        "regular_fraction",
        "max_components",
        "max_boundary_ratio",
        "flagged",
        "n",
        "m",
    ]
    .map(String::from)
    .to_vec();
    let cells = rows
        .iter()
        .map(|r| {
            vec![
                Cell::Int(r.level as u64),
                Cell::Real(r.h),
                Cell::Int(r.subdivision as u64),
                Cell::Int(r.band_tets as u64),
                Cell::Int(r.triangles as u64),
                Cell::Int(r.dropped as u64),
                Cell::Real(r.area),
                Cell::Real(r.area_rel_error),
                Cell::Real(r.regular_fraction),
                Cell::Int(r.max_components as u64),
                Cell::Real(r.max_boundary_ratio),
                Cell::Int(r.flagged as u64),
                Cell::Int(r.velocity_dofs as u64),
                Cell::Int(r.pressure_dofs as u64),
            ]
        })
        .collect();
    let warnings = resolution_warnings(cfg.surface, &cfg.levels);
    let report = ExperimentReport {
        kind: "diagnose".into(),
        config: cfg,
        warnings,
        columns,
        rows: cells,
    };
    Ok((report, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eoc_of_dyadic_errors() {
        let e = eoc(&[2, 3, 5], &[Some(1.0), Some(0.25), Some(0.25 / 16.0)]);
        assert_eq!(e[0], None);
        assert!((e[1].unwrap() - 2.0).abs() < 1e-14);
        assert!((e[2].unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(eoc(&[2, 3], &[None, Some(1.0)]), vec![None, None]);
    }

    #[test]
    fn torus_warning_depends_on_level() {
        assert!(resolution_warnings(Surface::Sphere, &[2]).is_empty());
        assert_eq!(resolution_warnings(Surface::Torus, &[4, 6]).len(), 1);
    }

    #[test]
    fn spread_needs_every_value() {
        assert_eq!(spread(&[Some(1.0), Some(2.0)]), Some(2.0));
        assert_eq!(spread(&[Some(1.0), None]), None);
    }
}
