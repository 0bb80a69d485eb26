//! Command-line driver: `hessflow <command> --problem <file> --out <dir> [overrides]`.
//!
//! Exit status: 0 when every assertion passes, 2 on configuration or I/O
//! errors, 3 on solver failure, 4 when an audit assertion fails.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use config::{ConfigError, ProblemFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_ASSERTION: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    /// Structure conditions and problem hypotheses.
    Check,
    /// Solve the initial-boundary value problem.
    Solve,
    /// Refinement study against the exact solution.
    Mms,
    /// Barrier, test-function, boundary and ratio audits.
    Audit,
    /// Audits across the refinement ladder.
    Sweep,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Check => "check",
            Self::Solve => "solve",
            Self::Mms => "mms",
            Self::Audit => "audit",
            Self::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "hessflow", version, about = "Parabolic Hessian equations on Riemannian charts")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: CommandKind,
    /// Problem file (TOML).
    #[arg(long)]
    pub problem: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Record wall-clock timestamps in the report.
    #[arg(long)]
    pub timestamps: bool,
}

/// Values that replace entries of the problem file. All of them enter the
/// config hash.
#[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Node counts per axis, e.g. `32,32`.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    #[arg(long = "R-ladder", value_delimiter = ',', allow_hyphen_values = true)]
    pub r_ladder: Option<Vec<f64>>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Refinement factors for audit and sweep, e.g. `1,2,4`.
    #[arg(long, value_delimiter = ',')]
    pub refine: Option<Vec<usize>>,
    /// Write a CSV snapshot every K stored states (first and last always).
    #[arg(long)]
    pub snapshot_every: Option<usize>,
}

impl Overrides {
    /// Canonical text hashed together with the problem file.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("overrides serialize")
    }

    pub fn apply(&self, file: &mut ProblemFile) -> Result<(), ConfigError> {
        let invalid = |field: &str, message: String| ConfigError::Validation { field: field.into(), message };
        if let Some(seed) = self.seed {
            file.audit.seed = seed;
        }
        if let Some(dt) = self.dt {
            file.solver.dt = dt;
        }
        if let Some(grid) = &self.grid {
            if grid.len() != file.grid.nodes.len() {
                return Err(invalid(
                    "grid",
                    format!("--grid needs {} entries, got {}", file.grid.nodes.len(), grid.len()),
                ));
            }
            file.grid.nodes = grid.clone();
        }
        if let Some(r) = &self.r_ladder {
            file.audit.r_ladder = r.clone();
        }
        if let Some(d) = self.delta {
            file.audit.delta = d;
        }
        if let Some(b) = self.b {
            file.audit.b = Some(b);
        }
        if let Some(r) = &self.refine {
            if r.is_empty() || r.contains(&0) {
                return Err(invalid("refine", "refinement factors must be positive".into()));
            }
            file.audit.refinement = r.clone();
        }
        if self.snapshot_every == Some(0) {
            return Err(invalid("snapshot_every", "must be positive".into()));
        }
        file.solver.validate().map_err(|e| invalid("solver", e.to_string()))
    }
}

/// Parsed command line plus the problem file it names.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub problem_path: PathBuf,
    pub out: PathBuf,
    pub overrides: Overrides,
    pub timestamps: bool,
}

impl From<Cli> for RunConfig {
    fn from(c: Cli) -> Self {
        Self {
            command: c.command,
            problem_path: c.problem,
            out: c.out,
            overrides: c.overrides,
            timestamps: c.timestamps,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("output error: {0}")]
    Output(String),
}

/// Runs one command, writes `report.json`, and returns the exit status.
pub fn run(config: &RunConfig) -> i32 {
    match commands::execute(config) {
        Ok(report) => {
            eprintln!("{}", report.summary_line());
            report.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

/// Applies `HESSFLOW_THREADS` to the global worker pool.
pub fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("HESSFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("HESSFLOW_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}
