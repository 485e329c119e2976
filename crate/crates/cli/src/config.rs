use std::path::{Path, PathBuf};

use mfmfe::adaptivity::{AdaptiveConfig, RefinementMode, SolverKind};
use mfmfe::benchmarks::problem_by_id;
use mfmfe::solver::{SchurMethod, SolveOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Adaptive,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Solver {
    Mfmfe,
    MixedExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schur {
    Auto,
    Cholesky,
    Pcg,
}

/// `[linear_solver]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearSolverConfig {
    pub schur: Schur,
    pub cholesky_limit: usize,
    pub pcg_tolerance: f64,
    pub pcg_max_iterations: usize,
}

impl Default for LinearSolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        LinearSolverConfig {
            schur: Schur::Auto,
            cholesky_limit: d.cholesky_limit,
            pcg_tolerance: d.pcg_tolerance,
            pcg_max_iterations: d.pcg_max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: String,
    pub mode: Mode,
    pub theta: f64,
    pub max_iterations: usize,
    pub max_elements: usize,
    pub include_hot: bool,
    pub solver: Solver,
    pub output: PathBuf,
    /// Uniform refinements applied before `solve`.
    pub uniform_levels: usize,
    pub record_wall_time: bool,
    pub linear_solver: LinearSolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = AdaptiveConfig::default();
        RunConfig {
            problem: "example71_r04".into(),
            mode: Mode::Adaptive,
            theta: d.theta,
            max_iterations: d.max_iterations,
            max_elements: d.max_elements,
            include_hot: d.include_hot,
            solver: Solver::Mfmfe,
            output: PathBuf::from("out"),
            uniform_levels: 0,
            record_wall_time: d.record_wall_time,
            linear_solver: LinearSolverConfig::default(),
        }
    }
}

/// A configuration problem, naming the offending field when there is one.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("field `{field}`: {msg}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        problem_by_id(&self.problem).map_err(|e| field_error("problem", e))?;
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(field_error("theta", format!("must lie in (0, 1], got {}", self.theta)));
        }
        if self.max_iterations == 0 {
            return Err(field_error("max_iterations", "must be positive"));
        }
        if self.max_elements == 0 {
            return Err(field_error("max_elements", "must be positive"));
        }
        if !(self.linear_solver.pcg_tolerance > 0.0) {
            return Err(field_error("linear_solver.pcg_tolerance", "must be positive"));
        }
        if self.linear_solver.pcg_max_iterations == 0 {
            return Err(field_error("linear_solver.pcg_max_iterations", "must be positive"));
        }
        Ok(())
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            schur: match self.linear_solver.schur {
                Schur::Auto => SchurMethod::Auto,
                Schur::Cholesky => SchurMethod::Cholesky,
                Schur::Pcg => SchurMethod::Pcg,
            },
            cholesky_limit: self.linear_solver.cholesky_limit,
            pcg_tolerance: self.linear_solver.pcg_tolerance,
            pcg_max_iterations: self.linear_solver.pcg_max_iterations,
        }
    }

    pub fn adaptive_config(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            theta: self.theta,
            max_iterations: self.max_iterations,
            max_elements: self.max_elements,
            mode: match self.mode {
                Mode::Adaptive => RefinementMode::Adaptive,
                Mode::Uniform => RefinementMode::Uniform,
            },
            include_hot: self.include_hot,
            solver: match self.solver {
                Solver::Mfmfe => SolverKind::Mfmfe,
                Solver::MixedExact => SolverKind::MixedExact,
            },
            solve_options: self.solve_options(),
            output: Some(self.output.clone()),
            record_wall_time: self.record_wall_time,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml("problem = \"example72\"\ntheta = 0.8\n[linear_solver]\nschur = \"pcg\"\n").unwrap();
        assert_eq!(c.problem, "example72");
        assert_eq!(c.theta, 0.8);
        assert_eq!(c.linear_solver.schur, Schur::Pcg);
        assert_eq!(c.max_iterations, 25);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_toml("thetta = 0.5\n").unwrap_err();
        assert!(e.0.contains("thetta"), "{e}");
        let e = RunConfig::from_toml("[linear_solver]\ntolerance = 1e-9\n").unwrap_err();
        assert!(e.0.contains("tolerance"), "{e}");
    }

    #[test]
    fn validation_names_the_field() {
        let c = RunConfig {
            theta: 0.0,
            ..Default::default()
        };
        assert!(c.validate().unwrap_err().0.contains("`theta`"));
        let c = RunConfig {
            problem: "nope".into(),
            ..Default::default()
        };
        assert!(c.validate().unwrap_err().0.contains("`problem`"));
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }
}
