//! Condition records shared by the structure, problem and estimate audits.

use serde::Serialize;

/// The inequality a record's margin must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "tolerance", rename_all = "snake_case")]
pub enum Comparison {
    /// `margin > 0`.
    Positive,
    /// `margin ≥ tolerance`.
    AtLeast(f64),
}

impl Comparison {
    pub fn holds(&self, margin: f64) -> bool {
        match *self {
            Comparison::Positive => margin > 0.0,
            Comparison::AtLeast(tol) => margin >= tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    /// Asserted: a failing margin fails the report.
    Checked,
    /// Measured and reported only.
    Informational,
    NotApplicable,
}

#[derive(Debug, Clone)]
pub struct ConditionRecord {
    pub id: String,
    pub samples: usize,
    pub worst_margin: f64,
    pub comparison: Comparison,
    pub status: ConditionStatus,
    pub note: String,
}

impl ConditionRecord {
    pub fn checked(
        id: &str,
        samples: usize,
        worst_margin: f64,
        comparison: Comparison,
        note: &str,
    ) -> Self {
        Self {
            id: id.into(),
            samples,
            worst_margin,
            comparison,
            status: ConditionStatus::Checked,
            note: note.into(),
        }
    }

    pub fn informational(id: &str, samples: usize, value: f64, note: &str) -> Self {
        Self {
            id: id.into(),
            samples,
            worst_margin: value,
            comparison: Comparison::AtLeast(f64::NEG_INFINITY),
            status: ConditionStatus::Informational,
            note: note.into(),
        }
    }

    /// Whether the margin satisfies the record's inequality.
    pub fn pass(&self) -> bool {
        self.comparison.holds(self.worst_margin)
    }

    /// Fails only for asserted records whose margin misses.
    pub fn ok(&self) -> bool {
        self.status != ConditionStatus::Checked || self.pass()
    }
}

impl Serialize for ConditionRecord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ConditionRecord", 7)?;
        st.serialize_field("id", &self.id)?;
        st.serialize_field("samples", &self.samples)?;
        st.serialize_field("worst_margin", &self.worst_margin)?;
        st.serialize_field("comparison", &self.comparison)?;
        st.serialize_field("status", &self.status)?;
        st.serialize_field("pass", &self.pass())?;
        st.serialize_field("note", &self.note)?;
        st.end()
    }
}

/// A titled list of condition records.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub title: String,
    pub records: Vec<ConditionRecord>,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            records: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(ConditionRecord::ok)
    }

    pub fn record(&self, id: &str) -> Option<&ConditionRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionRecord> {
        self.records.iter().filter(|r| !r.ok())
    }
}
