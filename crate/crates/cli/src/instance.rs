//! JSON instance files.
//!
//! The document mirrors the problem data symbol for symbol:
//!
//! ```json
//! {"n": 2, "Q0": [[..], [..]], "b0": [..], "Q1": [[..], [..]], "b1": [..], "c1": -1.0,
//!  "Q2": [[..], [..]], "b2": [..], "c2": -4.0}
//! ```

use std::path::{Path, PathBuf};

use qc2qp::model::Qc2qpInstance;
use qc2qp::symmat::SymMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed instance JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation at {field}: {detail}")]
    Schema { field: String, detail: String },
    #[error("invalid instance: {0}")]
    Model(#[from] qc2qp::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    #[serde(rename = "Q0")]
    pub q0: Vec<Vec<f64>>,
    pub b0: Vec<f64>,
    #[serde(rename = "Q1")]
    pub q1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub c1: f64,
    #[serde(rename = "Q2")]
    pub q2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
    pub c2: f64,
}

fn schema(field: impl Into<String>, detail: impl Into<String>) -> InstanceError {
    InstanceError::Schema {
        field: field.into(),
        detail: detail.into(),
    }
}

impl InstanceFile {
    pub fn from_instance(inst: &Qc2qpInstance) -> Self {
        let [c1, c2] = &inst.constraints;
        Self {
            n: inst.n,
            q0: inst.objective.q.to_rows(),
            b0: inst.objective.b.clone(),
            q1: c1.q.to_rows(),
            b1: c1.b.clone(),
            c1: c1.c,
            q2: c2.q.to_rows(),
            b2: c2.b.clone(),
            c2: c2.c,
        }
    }

    /// Checks every shape against `n`, naming the first offending field.
    pub fn validate(&self) -> Result<(), InstanceError> {
        let n = self.n;
        if n == 0 {
            return Err(schema("n", "dimension must be positive"));
        }
        for (name, m) in [("Q0", &self.q0), ("Q1", &self.q1), ("Q2", &self.q2)] {
            if m.len() != n {
                return Err(schema(name, format!("expected {n} rows, found {}", m.len())));
            }
            for (i, row) in m.iter().enumerate() {
                if row.len() != n {
                    return Err(schema(
                        format!("{name}[{i}]"),
                        format!("expected {n} entries, found {}", row.len()),
                    ));
                }
            }
        }
        for (name, b) in [("b0", &self.b0), ("b1", &self.b1), ("b2", &self.b2)] {
            if b.len() != n {
                return Err(schema(name, format!("expected {n} entries, found {}", b.len())));
            }
        }
        Ok(())
    }

    /// Validated instance. Asymmetric matrices are replaced by `(A + Aᵀ)/2` with a warning.
    pub fn to_instance(&self) -> Result<Qc2qpInstance, InstanceError> {
        self.validate()?;
        let sym = |name: &str, rows: &[Vec<f64>]| -> Result<SymMatrix, InstanceError> {
            let (m, asymmetric) = SymMatrix::from_rows_symmetrized(rows)?;
            if asymmetric {
                log::warn!("{name} is not symmetric; using (A + Aᵀ)/2");
            }
            Ok(m)
        };
        Ok(Qc2qpInstance::new(
            sym("Q0", &self.q0)?,
            self.b0.clone(),
            sym("Q1", &self.q1)?,
            self.b1.clone(),
            self.c1,
            sym("Q2", &self.q2)?,
            self.b2.clone(),
            self.c2,
        )?)
    }
}

pub fn parse_str(text: &str) -> Result<Qc2qpInstance, InstanceError> {
    serde_json::from_str::<InstanceFile>(text)?.to_instance()
}

pub fn parse_instance(path: &Path) -> Result<Qc2qpInstance, InstanceError> {
    let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&text)
}

/// Pretty JSON; `f64` values print in shortest round-trip form.
pub fn emit(inst: &Qc2qpInstance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(inst)).expect("plain data serializes")
}
