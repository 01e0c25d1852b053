//! On-disk formats: distance-matrix documents with provenance metadata and
//! comparison reports. JSON with explicit state ordering and full-precision
//! floats; matrices are validated against the pseudometric invariants both
//! when written and when read.

use std::fs;
use std::path::Path;

use ctbm_core::process::ProcessSpec;
use ctbm_core::pseudometric::PseudometricMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("matrix fails the pseudometric checks: {0}")]
    Metric(#[from] ctbm_core::pseudometric::MetricError),
    #[error("process document: {0}")]
    Spec(#[from] ctbm_core::process::SpecError),
    #[error("{0}")]
    Invalid(String),
}

/// How a distance matrix was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Kernel refinement with exact transport on kernel rows.
    ExactKernel,
    /// Trajectory refinement over empirical path laws.
    EmpiricalTrajectory,
    /// Closed-form recurrences of the five-state learning process.
    Oracle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixMetadata {
    pub estimator: EstimatorKind,
    pub discount: f64,
    pub time_tolerance: f64,
    pub fix_tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unconverged_pairs: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
}

/// A distance matrix over named states, with optional extrapolated entries
/// for slowly converging pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub states: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrapolated: Option<Vec<Vec<f64>>>,
    pub metadata: MatrixMetadata,
}

fn rows_to_matrix(states: &[String], rows: &[Vec<f64>]) -> Result<PseudometricMatrix, FormatError> {
    let n = states.len();
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(FormatError::Invalid(format!(
            "matrix shape does not match the {n} states"
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(PseudometricMatrix::from_entries(n, flat)?)
}

impl MatrixDocument {
    pub fn new(
        states: Vec<String>,
        matrix: &PseudometricMatrix,
        extrapolated: Option<&PseudometricMatrix>,
        metadata: MatrixMetadata,
    ) -> Result<Self, FormatError> {
        matrix.validate()?;
        if let Some(extra) = extrapolated {
            extra.validate()?;
        }
        if states.len() != matrix.len() {
            return Err(FormatError::Invalid(
                "state list and matrix size differ".into(),
            ));
        }
        Ok(Self {
            states,
            matrix: matrix.rows(),
            extrapolated: extrapolated.map(|m| m.rows()),
            metadata,
        })
    }

    /// The validated raw matrix.
    pub fn pseudometric(&self) -> Result<PseudometricMatrix, FormatError> {
        rows_to_matrix(&self.states, &self.matrix)
    }

    /// The extrapolated matrix when present, the raw one otherwise.
    pub fn best_estimate(&self) -> Result<PseudometricMatrix, FormatError> {
        match &self.extrapolated {
            Some(rows) => rows_to_matrix(&self.states, rows),
            None => self.pseudometric(),
        }
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        self.pseudometric()?;
        if self.extrapolated.is_some() {
            self.best_estimate()?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let doc: Self = serde_json::from_str(&text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        self.validate()?;
        fs::write(path, self.to_json()).map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix documents serialize")
    }

    /// Secondary CSV export: header row of state names, then matrix rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state");
        for name in &self.states {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (name, row) in self.states.iter().zip(&self.matrix) {
            out.push_str(name);
            for v in row {
                out.push(',');
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Per-pair comparison of the two distances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub a: String,
    pub b: String,
    pub kernel: f64,
    pub trajectory: f64,
    /// `trajectory - kernel`; the kernel distance never exceeds the
    /// trajectory distance, so this is nonnegative up to estimator noise.
    pub gap: f64,
    pub violation: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logic_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logic_witness: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub states: Vec<String>,
    pub tolerance: f64,
    pub violations: usize,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        fs::write(
            path,
            serde_json::to_string_pretty(self).expect("reports serialize"),
        )
        .map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Reads and validates a process document.
pub fn read_spec(path: &Path) -> Result<ProcessSpec, FormatError> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(ProcessSpec::parse(&text)?)
}
