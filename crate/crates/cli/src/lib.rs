//! Command-line front end: `simulate`, `eigen`, `periodic`, `classify`, `sweep`.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use seasonal_dispersal::config::RunConfig;
use seasonal_dispersal::output::{manifest_path, sibling_path};
use seasonal_dispersal::{
    classify_run, decay_rate_check, dichotomy_grid, load_config, monotone_periodic,
    poincare_fixed_point, seasonal_principal, simulate, sweep_radius, write_csv, write_json,
    Error, ErrorClass, PeriodicOrbit, RunManifest, SavePolicy, SimulateOptions, Table,
};
use serde_json::json;

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;

/// Caps the rayon pool; `0` or unset means one thread per core.
pub const THREADS_ENV: &str = "SEASONAL_DISPERSAL_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "seasonal-dispersal",
    version,
    about = "Nonlocal dispersal with seasonal succession",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Save {
    PeriodEnds,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Monotone,
    Poincare,
    Both,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the seasonal initial-value problem and write the trajectory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Number of whole periods (default: solver.periods).
        #[arg(long)]
        periods: Option<usize>,
        /// Good-season substeps (default: solver.substeps or the stability bound).
        #[arg(long)]
        substeps: Option<usize>,
        #[arg(long, value_enum, default_value = "period-ends")]
        save: Save,
        #[arg(long)]
        out: PathBuf,
    },
    /// Principal eigenvalue on the configured domain, or along a radius sweep.
    Eigen {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated radii; each domain is [-R, R] at the config's cell width.
        #[arg(long = "sweep-R", value_delimiter = ',')]
        sweep_r: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time-periodic positive solution.
    Periodic {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        method: Method,
        /// Stopping tolerance (default: solver.periodic_tol).
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Long simulation compared against the eigenvalue prediction.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        periods: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classification over a grid of (delta, rho) values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        delta: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        rho: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    configure_threads();
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Usage => EXIT_USAGE,
        ErrorClass::Numerical => EXIT_NUMERICAL,
        ErrorClass::Hypothesis => EXIT_HYPOTHESIS,
    }
}

fn configure_threads() {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        // a second call within one process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

type Result<T> = std::result::Result<T, Error>;

fn start(command: &str, config: &Path) -> Result<(RunConfig, RunManifest)> {
    let cfg = load_config(config)?;
    let echo = serde_json::to_value(&cfg)?;
    Ok((cfg, RunManifest::new(command, echo)))
}

fn finish(mut manifest: RunManifest, cfg: &RunConfig, out: &Path) -> Result<()> {
    if cfg.output.manifest {
        manifest.write(manifest_path(out))?;
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            periods,
            substeps,
            save,
            out,
        } => run_simulate(&config, periods, substeps, save, &out),
        Command::Eigen {
            config,
            sweep_r,
            out,
        } => run_eigen(&config, sweep_r, &out),
        Command::Periodic {
            config,
            method,
            tol,
            out,
        } => run_periodic(&config, method, tol, &out),
        Command::Classify {
            config,
            periods,
            out,
        } => run_classify(&config, periods, &out),
        Command::Sweep {
            config,
            delta,
            rho,
            out,
        } => run_sweep(&config, &delta, &rho, &out),
    }
}

fn run_simulate(
    config: &Path,
    periods: Option<usize>,
    substeps: Option<usize>,
    save: Save,
    out: &Path,
) -> Result<()> {
    let (cfg, mut manifest) = start("simulate", config)?;
    let sys = manifest.time("build", || cfg.build_system())?;
    let u0 = cfg.initial_state(sys.grid())?;
    let opts = SimulateOptions {
        periods: periods.unwrap_or(cfg.solver.periods),
        substeps: substeps
            .or(cfg.solver.substeps)
            .unwrap_or_else(|| sys.default_substeps()),
        save: match save {
            Save::PeriodEnds => SavePolicy::PeriodEnds,
            Save::All => SavePolicy::EverySubstep,
        },
    };
    let traj = manifest.time("simulate", || simulate(&u0, &sys, &opts))?;
    let mut table = Table::new(["t", "season", "node_index", "x", "u"]);
    for ((t, season), state) in traj.times.iter().zip(&traj.seasons).zip(&traj.states) {
        for (i, (x, u)) in sys.grid().nodes().iter().zip(state.iter()).enumerate() {
            table.push(vec![(*t).into(), season.as_str().into(), i.into(), (*x).into(), (*u).into()])?;
        }
    }
    let digest = write_csv(&table, out)?;
    manifest.add_file(out, digest);
    finish(manifest, &cfg, out)
}

fn run_eigen(config: &Path, radii: Option<Vec<f64>>, out: &Path) -> Result<()> {
    let (cfg, mut manifest) = start("eigen", config)?;
    let header = [
        "R",
        "lambda_p",
        "lambda_p_omega",
        "residual",
        "iterations",
        "bound_lo",
        "bound_hi",
    ];
    let mut table = Table::new(header);
    match radii {
        None => {
            let sys = manifest.time("build", || cfg.build_system())?;
            if let Ok(h2) = sys.op().check_h2(sys.model().b()) {
                if !h2.satisfied {
                    eprintln!(
                        "warning: kernel/coefficient condition not verified ({:.6e} <= {:.6e}); \
                         the discrete eigenvalue is reported regardless",
                        h2.lhs, h2.rhs
                    );
                }
            }
            let res = manifest.time("eigen", || seasonal_principal(&sys, &cfg.eigen_options()))?;
            let e = &res.eigen;
            table.push(vec![
                "domain".into(),
                e.lambda_p.into(),
                res.lambda_p_omega.into(),
                e.residual.into(),
                e.iterations.into(),
                e.bound_lo.into(),
                e.bound_hi.into(),
            ])?;
        }
        Some(radii) => {
            let base = cfg.sweep_base()?;
            let sweep = manifest.time("sweep", || sweep_radius(&base, &radii))?;
            for p in &sweep.points {
                match &p.outcome {
                    Ok((e, l)) => table.push(vec![
                        p.radius.into(),
                        e.lambda_p.into(),
                        (*l).into(),
                        e.residual.into(),
                        e.iterations.into(),
                        e.bound_lo.into(),
                        e.bound_hi.into(),
                    ])?,
                    Err(msg) => {
                        eprintln!("warning: R = {}: {msg}", p.radius);
                        table.push(vec![
                            p.radius.into(),
                            f64::NAN.into(),
                            f64::NAN.into(),
                            f64::NAN.into(),
                            0usize.into(),
                            f64::NAN.into(),
                            f64::NAN.into(),
                        ])?;
                    }
                }
            }
            let summary = json!({
                "lambda_p_omega_limit": sweep.lambda_p_omega_limit,
                "error_bar": sweep.error_bar,
                "cells": sweep.points.iter().map(|p| p.cells).collect::<Vec<_>>(),
            });
            let spath = sibling_path(out, "summary", "json");
            let d = write_json(&summary, &spath)?;
            manifest.add_file(&spath, d);
        }
    }
    let digest = write_csv(&table, out)?;
    manifest.add_file(out, digest);
    finish(manifest, &cfg, out)
}

fn orbit_table(orbit: &PeriodicOrbit, nodes: &[f64]) -> Result<Table> {
    let mut table = Table::new(["t", "node_index", "x", "U"]);
    for (t, state) in orbit.times.iter().zip(&orbit.states) {
        for (i, (x, u)) in nodes.iter().zip(state.iter()).enumerate() {
            table.push(vec![(*t).into(), i.into(), (*x).into(), (*u).into()])?;
        }
    }
    Ok(table)
}

fn orbit_summary(orbit: &PeriodicOrbit) -> serde_json::Value {
    json!({
        "method": orbit.method.as_str(),
        "iterations": orbit.iterations,
        "defect": orbit.periodicity_defect,
        "u_star_if_constant": orbit.constant_value(),
    })
}

fn run_periodic(config: &Path, method: Method, tol: Option<f64>, out: &Path) -> Result<()> {
    let (cfg, mut manifest) = start("periodic", config)?;
    let sys = manifest.time("build", || cfg.build_system())?;
    let res = manifest.time("eigen", || seasonal_principal(&sys, &cfg.eigen_options()))?;
    let mut opts = cfg.periodic_options();
    if let Some(t) = tol {
        opts.tol = t;
    }
    let mut summaries = Vec::new();
    if matches!(method, Method::Monotone | Method::Both) {
        let orbit = manifest.time("monotone", || monotone_periodic(&sys, &res, &opts))?;
        let d = write_csv(&orbit_table(&orbit, sys.grid().nodes())?, out)?;
        manifest.add_file(out, d);
        summaries.push(orbit_summary(&orbit));
    }
    if matches!(method, Method::Poincare | Method::Both) {
        let orbit = manifest.time("poincare", || poincare_fixed_point(&sys, &res, &opts))?;
        let path = if method == Method::Both {
            sibling_path(out, "poincare", "csv")
        } else {
            out.to_path_buf()
        };
        let d = write_csv(&orbit_table(&orbit, sys.grid().nodes())?, &path)?;
        manifest.add_file(&path, d);
        summaries.push(orbit_summary(&orbit));
    }
    let summary = if summaries.len() == 1 {
        summaries.remove(0)
    } else {
        serde_json::Value::Array(summaries)
    };
    let spath = sibling_path(out, "summary", "json");
    let d = write_json(&summary, &spath)?;
    manifest.add_file(&spath, d);
    finish(manifest, &cfg, out)
}

fn run_classify(config: &Path, periods: Option<usize>, out: &Path) -> Result<()> {
    let (cfg, mut manifest) = start("classify", config)?;
    let sys = manifest.time("build", || cfg.build_system())?;
    let u0 = cfg.initial_state(sys.grid())?;
    let mut opts = cfg.classify_options();
    if let Some(p) = periods {
        opts.periods = p;
    }
    let verdict = manifest.time("classify", || classify_run(&sys, &u0, &opts))?;
    let decay = decay_rate_check(&verdict, sys.clock());
    if verdict.degenerate {
        eprintln!("warning: initial data is identically zero");
    }
    let doc = json!({ "verdict": verdict, "decay_rate_check": decay });
    let d = write_json(&doc, out)?;
    manifest.add_file(out, d);
    finish(manifest, &cfg, out)
}

fn run_sweep(config: &Path, deltas: &[f64], rhos: &[f64], out: &Path) -> Result<()> {
    let (cfg, mut manifest) = start("sweep", config)?;
    let opts = cfg.classify_options();
    let build = |delta: f64, rho: f64| {
        let c = cfg.with_season(delta, rho);
        c.validate()?;
        let sys = c.build_system()?;
        let u0 = c.initial_state(sys.grid())?;
        Ok((sys, u0))
    };
    let rows = manifest.time("sweep", || dichotomy_grid(build, deltas, rhos, &opts))?;
    let mut table = Table::new(["delta", "rho", "lambda_p_omega", "predicted", "observed", "agreement"]);
    for row in &rows {
        match &row.outcome {
            Ok(c) => table.push(vec![
                c.delta.into(),
                c.rho.into(),
                c.lambda_p_omega.into(),
                c.predicted.as_str().into(),
                c.observed.as_str().into(),
                c.agreement.into(),
            ])?,
            Err(msg) => {
                eprintln!("warning: delta = {}, rho = {}: {msg}", row.delta, row.rho);
                table.push(vec![
                    row.delta.into(),
                    row.rho.into(),
                    f64::NAN.into(),
                    "error".into(),
                    "error".into(),
                    false.into(),
                ])?;
            }
        }
    }
    let d = write_csv(&table, out)?;
    manifest.add_file(out, d);
    finish(manifest, &cfg, out)
}
