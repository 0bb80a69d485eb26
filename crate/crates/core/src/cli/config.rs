//! Problem files: TOML with `[grid]`, `[metric]`, `[operator]`, `[A]`, `[psi]`,
//! `[phi]`, `[subsolution]`, `[solver]` and `[audit]` sections.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::estimates::PsiGrid;
use crate::expr::Expr;
use crate::geometry::{AxisTopology, ChartGeometry, ChartGrid, MetricKind};
use crate::operator::{AFieldSpec, GrowthParams, OperatorError, ProblemParts, ProblemSpec, PsiSpec, SampleBox};
use crate::solver::{MmsPlan, SolverConfig};
use crate::symfunc::{OperatorKind, OperatorSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nodes: Vec<usize>,
    pub topology: Vec<AxisTopology>,
}

impl GridSection {
    /// Node counts after refining every spacing by `scale`.
    pub fn scaled_nodes(&self, scale: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .zip(&self.topology)
            .map(|(&n, top)| match top {
                AxisTopology::Periodic => n * scale,
                AxisTopology::Boundary => (n - 1) * scale + 1,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub terms: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubSection {
    pub terms: Expr,
    /// Assert `u̲ = φ` on the lateral boundary.
    #[serde(default = "yes")]
    pub matches_boundary: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    pub samples: usize,
    pub seed: u64,
    pub r_ladder: Vec<f64>,
    /// `δ` of the test function.
    pub delta: f64,
    /// `b` of the test function; defaults to `1 + sup(u̲ − u)`.
    pub b: Option<f64>,
    /// Grid refinement factors for ratio drift and `sweep`.
    pub refinement: Vec<usize>,
    pub f6_threshold: Option<f64>,
    pub mms: MmsPlan,
    pub psi_barrier: PsiGrid,
    /// Tolerances asserted by `audit`.
    pub gap_tol: f64,
    pub drift_tol: f64,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            samples: 2000,
            seed: 0,
            r_ladder: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            delta: 0.1,
            b: None,
            refinement: vec![1, 2],
            f6_threshold: None,
            mms: MmsPlan::default(),
            psi_barrier: PsiGrid::default(),
            gap_tol: 1e-8,
            drift_tol: 0.1,
        }
    }
}

/// Parsed problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema: u32,
    pub name: String,
    pub horizon: f64,
    pub grid: GridSection,
    pub metric: MetricKind,
    pub operator: OperatorKind,
    #[serde(rename = "A", default = "zero_a")]
    pub a: AFieldSpec,
    pub psi: PsiSpec,
    pub phi: FieldSection,
    pub subsolution: SubSection,
    #[serde(default)]
    pub exact: Option<FieldSection>,
    #[serde(default)]
    pub growth: GrowthParams,
    #[serde(default)]
    pub sample_box: SampleBox,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub audit: AuditSection,
}

fn zero_a() -> AFieldSpec {
    AFieldSpec::Zero
}

fn operator_field(e: &OperatorError) -> &'static str {
    match e {
        OperatorError::Inadmissible { .. } => "phi",
        OperatorError::Geometry(_) => "metric",
        OperatorError::Sym(_) => "operator",
        OperatorError::Validation(m) if m.starts_with("A.") => "A",
        OperatorError::Validation(m) if m.starts_with("horizon") => "horizon",
        OperatorError::Validation(m) if m.starts_with("sample box") => "sample_box",
        OperatorError::Validation(m) if m.starts_with("subsolution") => "subsolution",
        OperatorError::Validation(m) if m.starts_with("exact") => "exact",
        OperatorError::Validation(m) if m.starts_with("phi") => "phi",
        OperatorError::Validation(_) => "operator",
    }
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let file: ProblemFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string().trim_end().to_string()))?;
        if file.schema != SCHEMA_VERSION {
            return Err(invalid("schema", format!("expected {SCHEMA_VERSION}, found {}", file.schema)));
        }
        file.solver
            .validate()
            .map_err(|e| invalid("solver", e.to_string()))?;
        Ok(file)
    }

    pub fn load(path: &std::path::Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok((Self::parse(&text)?, text))
    }

    /// Chart refined by `scale` (1 = as written).
    pub fn geometry(&self, scale: usize) -> Result<ChartGeometry, ConfigError> {
        let g = &self.grid;
        let grid = ChartGrid::from_bounds(&g.lower, &g.upper, &g.scaled_nodes(scale.max(1)), &g.topology)
            .map_err(|e| invalid("grid", e.to_string()))?;
        ChartGeometry::new(grid, self.metric.clone()).map_err(|e| invalid("metric", e.to_string()))
    }

    pub fn problem(&self, scale: usize) -> Result<ProblemSpec, ConfigError> {
        let geo = self.geometry(scale)?;
        let op = OperatorSpec::new(self.operator, geo.dim()).map_err(|e| invalid("operator", e.to_string()))?;
        ProblemSpec::new(ProblemParts {
            name: self.name.clone(),
            geo,
            op,
            a: self.a.clone(),
            psi: self.psi.clone(),
            phi: self.phi.terms.clone(),
            sub: self.subsolution.terms.clone(),
            horizon: self.horizon,
            exact: self.exact.as_ref().map(|e| e.terms.clone()),
            growth: self.growth,
            sample_box: self.sample_box,
            sub_matches_boundary: self.subsolution.matches_boundary,
        })
        .map_err(|e| invalid(operator_field(&e), e.to_string()))
    }

    pub fn operator_spec(&self) -> Result<OperatorSpec, ConfigError> {
        OperatorSpec::new(self.operator, self.grid.nodes.len()).map_err(|e| invalid("operator", e.to_string()))
    }
}

/// Hex SHA-256 of the problem text followed by the canonical overrides.
pub fn config_hash(text: &str, overrides: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.update([0u8]);
    h.update(overrides.as_bytes());
    hex::encode(h.finalize())
}
