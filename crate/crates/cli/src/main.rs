use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;
use tracestokes::assembly::Stabilization;
use tracestokes::experiments::{
    diagnose, run_convergence, run_infsup, run_shift_study, Discretization, ExperimentConfig,
    ExperimentReport,
};
use tracestokes::mesh::mesh_size;
use tracestokes::Result;

/// Trace finite element experiments for the surface Stokes problem.
#[derive(Parser)]
#[command(name = "tracestokes", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat TOML configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the generated files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Writes the background mesh of the first level to this file.
    #[arg(long, value_name = "PATH")]
    dump_mesh: Option<PathBuf>,
    /// Writes the discrete surface of the first level to this file.
    #[arg(long, value_name = "PATH")]
    dump_surface: Option<PathBuf>,
    /// Writes A, B, C, M0 and Mstar of the first level into this directory.
    #[arg(long, value_name = "DIR")]
    dump_matrices: Option<PathBuf>,
}

impl Common {
    fn wants_dump(&self) -> bool {
        self.dump_mesh.is_some() || self.dump_surface.is_some() || self.dump_matrices.is_some()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Error norms and convergence orders for the manufactured solution.
    Converge(Common),
    /// Extreme eigenvalues of the pressure Schur complement per level.
    Infsup(Common),
    /// Inf-sup eigenvalues on translated copies of the surface.
    Shift(Common),
    /// Mesh, band and surface statistics.
    Diagnose(Common),
    /// Writes mesh, surface and matrices of the first configured level.
    /// Without `--dump-*` flags everything goes to `--out`.
    Dump(Common),
    /// Prints the fully defaulted configuration.
    Defaults,
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    std::fs::create_dir_all(&common.out)?;
    Ok(cfg)
}

/// Loads the configuration and honours any `--dump-*` flags.
fn prepare(common: &Common) -> Result<ExperimentConfig> {
    let cfg = load(common)?;
    if common.wants_dump() {
        dump(&cfg, common)?;
    }
    Ok(cfg)
}

fn emit(report: &ExperimentReport, out: &Path) -> Result<usize> {
    for w in &report.warnings {
        warn!("{w}");
    }
    let path = out.join(format!("{}.csv", report.kind));
    report.write_csv(&path)?;
    println!("wrote {}", path.display());
    Ok(report.failures())
}

fn dump(cfg: &ExperimentConfig, common: &Common) -> Result<()> {
    let level = cfg.levels[0];
    let phi = cfg
        .surface
        .level_set()
        .shifted(cfg.shift_direction, cfg.shift_alpha)?;
    let d = Discretization::build(
        &phi,
        level,
        cfg.pair,
        cfg.subdivision_override(),
        cfg.exec_mode(),
    )?;
    if let Some(path) = &common.dump_mesh {
        d.mesh.dump_to_file(path)?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = &common.dump_surface {
        d.cut.dump_to_file(path)?;
        println!("wrote {}", path.display());
    }
    if let Some(dir) = &common.dump_matrices {
        std::fs::create_dir_all(dir)?;
        let stab = cfg.stabilization_list(&[Stabilization::Normal])[0];
        let sys = d.assemble(
            &cfg.parameters(mesh_size(level)),
            stab,
            cfg.mass_for(stab),
            None,
        )?;
        for (name, m) in [
            ("A", &sys.a),
            ("B", &sys.b),
            ("C", &sys.c),
            ("M0", &sys.m0),
            ("Mstar", &sys.mstar),
        ] {
            let path = dir.join(format!("{name}.coo"));
            m.dump_to_file(&path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<usize> {
    match cli.command {
        Command::Converge(c) => {
            let cfg = prepare(&c)?;
            let study = run_convergence(&cfg)?;
            emit(&study.report(), &c.out)
        }
        Command::Infsup(c) => {
            let cfg = prepare(&c)?;
            emit(&run_infsup(&cfg)?.report(), &c.out)
        }
        Command::Shift(c) => {
            let cfg = prepare(&c)?;
            emit(&run_shift_study(&cfg)?.report(), &c.out)
        }
        Command::Diagnose(c) => {
            let cfg = prepare(&c)?;
            let (report, _) = diagnose(&cfg)?;
            emit(&report, &c.out)
        }
        Command::Dump(mut c) => {
            let cfg = load(&c)?;
            if !c.wants_dump() {
                c.dump_mesh = Some(c.out.join("mesh.txt"));
                c.dump_surface = Some(c.out.join("surface.txt"));
                c.dump_matrices = Some(c.out.clone());
            }
            dump(&cfg, &c)?;
            Ok(0)
        }
        Command::Defaults => {
            print!("{}", ExperimentConfig::default().to_toml());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} row(s) failed; see the status column");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
