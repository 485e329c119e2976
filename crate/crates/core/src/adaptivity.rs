//! Dörfler marking and the solve–estimate–mark–refine loop.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Vector2;
use thiserror::Error;

use crate::benchmarks::{exact_errors, DarcyProblem};
use crate::estimator::{compute_report, ratio, EstimatorOptions, EstimatorReport};
use crate::mesh::{refine, MarkedSet, Mesh};
use crate::postprocess::nodal_average_pressure;
use crate::solver::{solve_mfmfe, solve_mixed_exact, DiscreteSolution, SolveOptions, SolverError};
use crate::vtk::{write_vtk, Field};

/// Shortest prefix of the elements sorted by `(η²_T desc, index asc)` whose
/// indicators sum to at least `theta` times the total.
pub fn dorfler_mark(eta_sq: &[f64], theta: f64) -> MarkedSet {
    assert!(theta > 0.0 && theta <= 1.0, "marking parameter must lie in (0, 1]");
    let n = eta_sq.len();
    let mut order: Vec<usize> = (0..n).filter(|&t| eta_sq[t] > 0.0).collect();
    order.sort_by(|&a, &b| eta_sq[b].total_cmp(&eta_sq[a]).then(a.cmp(&b)));
    if order.is_empty() {
        return MarkedSet::default();
    }
    if theta >= 1.0 {
        return MarkedSet::new(order, n);
    }
    let total: f64 = order.iter().map(|&t| eta_sq[t]).sum();
    let target = theta * total;
    let mut sum = 0.0;
    let mut count = 0;
    for &t in &order {
        sum += eta_sq[t];
        count += 1;
        if sum >= target {
            break;
        }
    }
    order.truncate(count);
    MarkedSet::new(order, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefinementMode {
    #[default]
    Adaptive,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Vertex quadrature with local velocity elimination.
    #[default]
    Mfmfe,
    /// Degree-5 velocity mass matrix, full saddle-point solve.
    MixedExact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveConfig {
    pub theta: f64,
    pub max_iterations: usize,
    pub max_elements: usize,
    pub mode: RefinementMode,
    pub include_hot: bool,
    pub solver: SolverKind,
    pub solve_options: SolveOptions,
    /// Per-iteration files and `history.csv` go here when set.
    pub output: Option<PathBuf>,
    /// Record per-iteration wall time; when off the `seconds` column is 0 and
    /// repeated runs produce identical files.
    pub record_wall_time: bool,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            theta: 0.5,
            max_iterations: 25,
            max_elements: 100_000,
            mode: RefinementMode::Adaptive,
            include_hot: true,
            solver: SolverKind::Mfmfe,
            solve_options: SolveOptions::default(),
            output: None,
            record_wall_time: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum AdaptiveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("iteration {iteration}: {source}")]
    Solver {
        iteration: usize,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<(), AdaptiveError> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(AdaptiveError::Config(format!("theta = {} is outside (0, 1]", self.theta)));
        }
        if self.max_iterations == 0 {
            return Err(AdaptiveError::Config("max_iterations must be positive".into()));
        }
        if self.max_elements == 0 {
            return Err(AdaptiveError::Config("max_elements must be positive".into()));
        }
        Ok(())
    }
}

/// One line of `history.csv`; error columns are NaN without an exact solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub n_elements: usize,
    pub ndof_u: usize,
    pub ndof_p: usize,
    pub h_max: f64,
    pub h_min: f64,
    pub eta_h: f64,
    pub eta_q: f64,
    pub eta_total: f64,
    pub err_u: f64,
    pub err_p: f64,
    pub err_qhp: f64,
    pub eff_index: f64,
    pub seconds: f64,
}

pub const HISTORY_HEADER: &str =
    "iter,N,ndof_u,ndof_p,h_max,h_min,eta_h,eta_Q,eta_total,err_u,err_p,err_Qhp,eff_index,seconds";

impl HistoryRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.iter,
            self.n_elements,
            self.ndof_u,
            self.ndof_p,
            self.h_max,
            self.h_min,
            self.eta_h,
            self.eta_q,
            self.eta_total,
            self.err_u,
            self.err_p,
            self.err_qhp,
            self.eff_index,
            self.seconds
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceHistory {
    pub rows: Vec<HistoryRow>,
}

impl ConvergenceHistory {
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{HISTORY_HEADER}")?;
        for r in &self.rows {
            writeln!(out, "{}", r.to_csv())?;
        }
        Ok(())
    }
}

/// Everything known at the end of one loop iteration.
pub struct IterationState<'a> {
    pub iteration: usize,
    pub mesh: &'a Mesh,
    pub solution: &'a DiscreteSolution,
    pub report: &'a EstimatorReport,
    pub row: &'a HistoryRow,
}

pub struct AdaptiveRun {
    pub history: ConvergenceHistory,
    pub mesh: Mesh,
    pub solution: DiscreteSolution,
    pub report: EstimatorReport,
}

pub fn solve_with(mesh: &Mesh, problem: &dyn DarcyProblem, config: &AdaptiveConfig) -> Result<DiscreteSolution, SolverError> {
    match config.solver {
        SolverKind::Mfmfe => solve_mfmfe(mesh, problem, &config.solve_options),
        SolverKind::MixedExact => solve_mixed_exact(mesh, problem),
    }
}

impl SolverKind {
    /// Whether η_Q belongs to the error bound; the exactly integrated method
    /// reports it but has no quadrature error.
    pub fn counts_eta_q(self) -> bool {
        self == SolverKind::Mfmfe
    }
}

/// Per-element marking indicators, without `η²_{Q,T}` when `include_eta_q` is off.
pub fn marking_indicators(report: &EstimatorReport, include_eta_q: bool) -> Vec<f64> {
    if include_eta_q {
        report.indicators_sq()
    } else {
        report.elements.iter().map(|e| e.residual + e.jump).collect()
    }
}

/// Builds the history row for a solved mesh. `eta_total` drops η_Q when
/// `include_eta_q` is off.
pub fn history_row(
    iteration: usize,
    mesh: &Mesh,
    problem: &dyn DarcyProblem,
    solution: &DiscreteSolution,
    report: &EstimatorReport,
    include_eta_q: bool,
    seconds: f64,
) -> HistoryRow {
    let eta_total = if include_eta_q { report.eta_total } else { report.eta_h };
    let errors = exact_errors(mesh, &solution.u, &solution.p, problem).ok();
    let err = |f: fn(&crate::benchmarks::ExactErrors) -> f64| errors.as_ref().map_or(f64::NAN, f);
    HistoryRow {
        iter: iteration,
        n_elements: mesh.n_elements(),
        ndof_u: solution.diagnostics.n_velocity,
        ndof_p: solution.diagnostics.n_pressure,
        h_max: mesh.h_max(),
        h_min: mesh.h_min(),
        eta_h: report.eta_h,
        eta_q: report.eta_q,
        eta_total,
        err_u: err(|e| e.err_u),
        err_p: err(|e| e.err_p),
        err_qhp: err(|e| e.err_qhp),
        eff_index: errors.map_or(f64::NAN, |e| ratio(eta_total, e.err_u)),
        seconds,
    }
}

/// Mesh, solution and indicator files for one iteration.
pub fn write_iteration_files(
    dir: &Path,
    iteration: usize,
    mesh: &Mesh,
    solution: &DiscreteSolution,
    report: &EstimatorReport,
) -> std::io::Result<()> {
    for sub in ["meshes", "solutions", "reports"] {
        std::fs::create_dir_all(dir.join(sub))?;
    }
    let tags: Vec<f64> = mesh.element_tags().iter().map(|&t| t as f64).collect();
    let levels: Vec<f64> = (0..mesh.n_elements()).map(|t| mesh.level(t) as f64).collect();
    let eta_sq = report.indicators_sq();
    let mesh_file = BufWriter::new(File::create(dir.join(format!("meshes/mesh_{iteration:04}.vtk")))?);
    write_vtk(
        mesh_file,
        "mesh",
        mesh,
        &[Field::Scalar("tag", &tags), Field::Scalar("level", &levels), Field::Scalar("eta_sq", &eta_sq)],
        &[],
    )?;
    let velocity: Vec<Vector2<f64>> = (0..mesh.n_elements())
        .map(|t| solution.u.element_values(mesh, t).eval(mesh.centroid(t)))
        .collect();
    let nodal = nodal_average_pressure(mesh, &solution.p);
    let sol_file = BufWriter::new(File::create(dir.join(format!("solutions/sol_{iteration:04}.vtk")))?);
    write_vtk(
        sol_file,
        "solution",
        mesh,
        &[
            Field::Scalar("pressure", &solution.p.0),
            Field::Vector("velocity", &velocity),
            Field::Scalar("eta_sq", &eta_sq),
        ],
        &[Field::Scalar("pressure_nodal", &nodal)],
    )?;
    report.write_csv(BufWriter::new(File::create(dir.join(format!("reports/report_{iteration:04}.csv")))?))
}

pub fn run_adaptive(problem: &dyn DarcyProblem, config: &AdaptiveConfig) -> Result<AdaptiveRun, AdaptiveError> {
    run_adaptive_from(problem.initial_mesh(), problem, config, |_| {})
}

/// Runs the loop from `mesh`, calling `observe` after every iteration.
pub fn run_adaptive_from(
    mut mesh: Mesh,
    problem: &dyn DarcyProblem,
    config: &AdaptiveConfig,
    mut observe: impl FnMut(&IterationState),
) -> Result<AdaptiveRun, AdaptiveError> {
    config.validate()?;
    let mut history_file = match &config.output {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut f = BufWriter::new(File::create(dir.join("history.csv"))?);
            writeln!(f, "{HISTORY_HEADER}")?;
            f.flush()?;
            Some(f)
        }
        None => None,
    };
    let estimator = EstimatorOptions {
        include_hot: config.include_hot,
    };
    let mut history = ConvergenceHistory::default();
    let mut iteration = 0;
    loop {
        let start = Instant::now();
        let solution = solve_with(&mesh, problem, config).map_err(|source| AdaptiveError::Solver { iteration, source })?;
        let report = compute_report(&mesh, &solution.u, problem, &estimator);
        let seconds = if config.record_wall_time {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        let row = history_row(iteration, &mesh, problem, &solution, &report, config.solver.counts_eta_q(), seconds);
        if let Some(prev) = history.rows.last() {
            if iteration > 2 && config.mode == RefinementMode::Adaptive && row.eta_total > prev.eta_total {
                log::warn!(
                    "estimator increased at iteration {iteration}: {:.6e} -> {:.6e}",
                    prev.eta_total,
                    row.eta_total
                );
            }
        }
        if let Some(dir) = &config.output {
            write_iteration_files(dir, iteration, &mesh, &solution, &report)?;
        }
        if let Some(f) = history_file.as_mut() {
            writeln!(f, "{}", row.to_csv())?;
            f.flush()?;
        }
        log::info!(
            "iteration {iteration}: N = {}, eta = {:.4e}, err_u = {:.4e}",
            row.n_elements,
            row.eta_total,
            row.err_u
        );
        observe(&IterationState {
            iteration,
            mesh: &mesh,
            solution: &solution,
            report: &report,
            row: &row,
        });
        history.rows.push(row);

        let marked = match config.mode {
            RefinementMode::Adaptive => dorfler_mark(&marking_indicators(&report, config.solver.counts_eta_q()), config.theta),
            RefinementMode::Uniform => MarkedSet::all(mesh.n_elements()),
        };
        let done = iteration + 1 >= config.max_iterations || marked.is_empty();
        let next = if done { None } else { Some(refine(&mesh, &marked)) };
        match next {
            Some(m) if m.n_elements() <= config.max_elements => {
                mesh = m;
                iteration += 1;
            }
            _ => {
                return Ok(AdaptiveRun {
                    history,
                    mesh,
                    solution,
                    report,
                })
            }
        }
    }
}
