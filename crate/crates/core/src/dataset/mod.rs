//! Closed-loop records, CSV persistence, min-max normalization and
//! scenario-wise splitting.

mod io;
mod normalize;
mod split;

pub use io::{read_csv, read_dataset, sidecar_path, write_csv, write_dataset};
pub use normalize::{ColumnScale, NormalizationSpec};
pub use split::{split, split_fractions, DatasetSplit};

use crate::error::{Error, Result};
use crate::legendre::CoefficientLayout;
use serde::{Deserialize, Serialize};

/// Feature columns produced by the closed-loop generator, in order.
pub const FEATURE_NAMES: [&str; 13] = [
    "input_w",
    "input_theta",
    "input_vx",
    "input_steer",
    "input_throttle",
    "input_yawrate",
    "input_refv",
    "input_refv_error",
    "input_curv0",
    "input_curv1",
    "input_curv2",
    "input_paramCBF_dobs",
    "input_paramCBF_aobs",
];

pub const KPI_NAMES: [&str; 3] = ["K1", "K2_ms", "K2_iters"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopRecord {
    pub instance_id: u64,
    pub scenario_id: u64,
    pub timestamp: f64,
    pub features: Vec<f64>,
    /// Coefficient vector in the layout's order.
    pub target: Vec<f64>,
    pub k1: f64,
    pub k2_ms: f64,
    pub k2_iters: f64,
    pub converged: bool,
    pub violation: bool,
}

impl ClosedLoopRecord {
    pub fn kpi(&self, name: &str) -> Option<f64> {
        match name {
            "K1" => Some(self.k1),
            "K2_ms" => Some(self.k2_ms),
            "K2_iters" => Some(self.k2_iters),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.features.iter().chain(&self.target).all(|v| v.is_finite())
            && self.k1.is_finite()
            && self.k2_ms.is_finite()
            && self.k2_iters.is_finite()
    }
}

/// Column naming and spline shape shared by every record of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub feature_names: Vec<String>,
    pub layout: CoefficientLayout,
}

impl DatasetSchema {
    pub fn new(layout: CoefficientLayout) -> Self {
        Self {
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            layout,
        }
    }

    pub fn n_predict(&self) -> usize {
        self.layout.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    pub fn target_names(&self) -> Vec<String> {
        self.layout.column_names()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: DatasetSchema,
    pub records: Vec<ClosedLoopRecord>,
}

impl Dataset {
    /// Checks shapes and finiteness of every record.
    pub fn new(schema: DatasetSchema, records: Vec<ClosedLoopRecord>) -> Result<Self> {
        let d = Self { schema, records };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let nf = self.schema.feature_names.len();
        let np = self.schema.n_predict();
        for (i, r) in self.records.iter().enumerate() {
            if r.features.len() != nf || r.target.len() != np {
                return Err(Error::Shape(format!(
                    "record {i}: {} features and {} targets, expected {nf} and {np}",
                    r.features.len(),
                    r.target.len()
                )));
            }
            if !r.is_finite() {
                return Err(Error::Domain(format!("record {i} holds non-finite values")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    pub fn feature_matrix(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.features.clone()).collect()
    }

    pub fn target_matrix(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.target.clone()).collect()
    }

    /// Column named `name` among features and KPIs.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        if let Some(j) = self.schema.feature_index(name) {
            return Ok(self.records.iter().map(|r| r.features[j]).collect());
        }
        if KPI_NAMES.contains(&name) {
            return Ok(self.records.iter().map(|r| r.kpi(name).unwrap_or(f64::NAN)).collect());
        }
        Err(Error::MissingColumn(name.to_string()))
    }
}
