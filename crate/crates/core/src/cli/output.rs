//! Report JSON and CSV series.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{CliError, CommandKind, EXIT_ASSERTION, EXIT_OK, EXIT_SOLVER};
use crate::geometry::ChartGrid;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub problem: String,
    pub problem_path: String,
    pub config_hash: String,
    pub seed: u64,
    pub overrides: serde_json::Value,
    /// Unix seconds; present only with `--timestamps`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub started: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished: Option<u64>,
}

/// One asserted condition of a command.
#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub id: String,
    pub pass: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(id: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self { id: id.into(), pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub command: CommandKind,
    pub meta: Meta,
    pub exit_code: i32,
    pub assertions: Vec<Assertion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver_error: Option<String>,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
    pub payload: serde_json::Value,
}

impl Report {
    pub fn exit_code_for(assertions: &[Assertion], solver_error: bool) -> i32 {
        if solver_error {
            EXIT_SOLVER
        } else if assertions.iter().all(|a| a.pass) {
            EXIT_OK
        } else {
            EXIT_ASSERTION
        }
    }

    pub fn summary_line(&self) -> String {
        let failed: Vec<&str> = self.assertions.iter().filter(|a| !a.pass).map(|a| a.id.as_str()).collect();
        let mut s = format!(
            "{} {}: exit {}, {} assertions, {} failed",
            self.command.name(),
            self.meta.problem,
            self.exit_code,
            self.assertions.len(),
            failed.len()
        );
        if !failed.is_empty() {
            let _ = write!(s, " ({})", failed.join(", "));
        }
        if let Some(e) = &self.solver_error {
            let _ = write!(s, "; solver error: {e}");
        }
        s
    }
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

/// Snapshot CSV: `x0,…,x{n-1},t,u`, one row per node.
pub fn snapshot_csv(grid: &ChartGrid, t: f64, u: &[f64]) -> String {
    let n = grid.dim();
    let mut s = String::new();
    let header: Vec<String> = (0..n).map(|k| format!("x{k}")).collect();
    let _ = writeln!(s, "{},t,u", header.join(","));
    for (node, v) in u.iter().enumerate() {
        for c in grid.coords(node) {
            let _ = write!(s, "{c:.17e},");
        }
        let _ = writeln!(s, "{t:.17e},{v:.17e}");
    }
    s
}

/// Generic CSV from a header and rows.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}
