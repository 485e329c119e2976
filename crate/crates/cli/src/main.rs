//! `mfmfe solve | adapt | verify`.
//!
//! Exit codes: 0 success, 1 usage, 2 configuration or output I/O, 3 numerical
//! failure or failed audit. `MFMFE_THREADS` caps the worker pool.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfmfe::adaptivity::{history_row, run_adaptive, solve_with, write_iteration_files, AdaptiveError, HISTORY_HEADER};
use mfmfe::benchmarks::problem_by_id;
use mfmfe::estimator::{compute_report, EstimatorOptions};
use mfmfe::mesh::uniform_refine;
use mfmfe::verify::run_audits;
use serde::Serialize;

use config::{ConfigError, Mode, RunConfig, Solver};

const THREADS_VAR: &str = "MFMFE_THREADS";

#[derive(Parser)]
#[command(name = "mfmfe", version, about = "Multipoint flux mixed finite elements for 2D Darcy flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single solve on the initial or uniformly refined mesh.
    Solve(RunArgs),
    /// Solve, estimate, mark and refine until a limit is reached.
    Adapt(RunArgs),
    /// Run the built-in property audits.
    Verify,
}

/// Flags override values from `--config`.
#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    max_elements: Option<usize>,
    #[arg(long)]
    include_hot: Option<bool>,
    #[arg(long, value_enum)]
    solver: Option<Solver>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    uniform_levels: Option<usize>,
    #[arg(long)]
    record_wall_time: Option<bool>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {$(
                if let Some(v) = &self.$flag {
                    c.$field = v.clone();
                }
            )*};
        }
        set!(problem => problem, mode => mode, theta => theta, max_iterations => max_iterations,
             max_elements => max_elements, include_hot => include_hot, solver => solver, out => output,
             uniform_levels => uniform_levels, record_wall_time => record_wall_time);
        c.validate()?;
        Ok(c)
    }
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn exit(self) -> ExitCode {
        match self {
            Failure::Config(m) => {
                eprintln!("error: {m}");
                ExitCode::from(2)
            }
            Failure::Numerical(m) => {
                eprintln!("error: {m}");
                ExitCode::from(3)
            }
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("cannot write output: {e}"))
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    mfmfe_version: &'a str,
    cli_version: &'a str,
    config: &'a RunConfig,
}

fn write_manifest(dir: &Path, command: &str, config: &RunConfig) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)?;
    let manifest = Manifest {
        command,
        mfmfe_version: mfmfe::VERSION,
        cli_version: env!("CARGO_PKG_VERSION"),
        config,
    };
    let text = toml::to_string(&manifest).map_err(|e| Failure::Config(e.to_string()))?;
    std::fs::write(dir.join("manifest"), text)?;
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmd_solve(config: &RunConfig) -> Result<(), Failure> {
    let problem = problem_by_id(&config.problem).map_err(|e| Failure::Config(e.to_string()))?;
    let mut mesh = problem.initial_mesh();
    for _ in 0..config.uniform_levels {
        mesh = uniform_refine(&mesh);
    }
    let adaptive = config.adaptive_config();
    let solution = solve_with(&mesh, problem.as_ref(), &adaptive).map_err(|e| Failure::Numerical(e.to_string()))?;
    let report = compute_report(
        &mesh,
        &solution.u,
        problem.as_ref(),
        &EstimatorOptions {
            include_hot: config.include_hot,
        },
    );
    let row = history_row(0, &mesh, problem.as_ref(), &solution, &report, adaptive.solver.counts_eta_q(), 0.0);
    write_manifest(&config.output, "solve", config)?;
    write_iteration_files(&config.output, 0, &mesh, &solution, &report)?;
    let mut history = BufWriter::new(File::create(config.output.join("history.csv"))?);
    writeln!(history, "{HISTORY_HEADER}\n{}", row.to_csv())?;
    history.flush()?;
    println!(
        "problem={} N={} ndof_u={} ndof_p={} eta_h={} eta_Q={} eta_total={} err_u={} err_p={} err_Qhp={}",
        config.problem,
        row.n_elements,
        row.ndof_u,
        row.ndof_p,
        fmt(row.eta_h),
        fmt(row.eta_q),
        fmt(row.eta_total),
        fmt(row.err_u),
        fmt(row.err_p),
        fmt(row.err_qhp)
    );
    Ok(())
}

fn cmd_adapt(config: &RunConfig) -> Result<(), Failure> {
    let problem = problem_by_id(&config.problem).map_err(|e| Failure::Config(e.to_string()))?;
    write_manifest(&config.output, "adapt", config)?;
    let run = run_adaptive(problem.as_ref(), &config.adaptive_config()).map_err(|e| match e {
        AdaptiveError::Io(e) => Failure::from(e),
        AdaptiveError::Config(m) => Failure::Config(m),
        e @ AdaptiveError::Solver { .. } => Failure::Numerical(e.to_string()),
    })?;
    println!(
        "{:>5} {:>9} {:>12} {:>12} {:>12} {:>12} {:>10}",
        "iter", "N", "eta_h", "eta_Q", "eta_total", "err_u", "eff_index"
    );
    for r in &run.history.rows {
        println!(
            "{:>5} {:>9} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>10.4}",
            r.iter, r.n_elements, r.eta_h, r.eta_q, r.eta_total, r.err_u, r.eff_index
        );
    }
    Ok(())
}

fn cmd_verify() -> Result<(), Failure> {
    let outcomes = run_audits();
    let mut failed = Vec::new();
    for a in &outcomes {
        println!("audit {}: {} ({})", a.id, if a.passed { "PASS" } else { "FAIL" }, a.detail);
        if !a.passed {
            failed.push(a.id);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("failed audits: {}", failed.join(", "))))
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("{THREADS_VAR} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Solve(args) => cmd_solve(&args.resolve()?),
        Command::Adapt(args) => cmd_adapt(&args.resolve()?),
        Command::Verify => cmd_verify(),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.exit(),
    }
}
