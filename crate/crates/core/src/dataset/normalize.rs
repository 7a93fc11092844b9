use super::Dataset;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Affine map of `[min, max]` onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub min: f64,
    pub max: f64,
    /// Constant column passed through unchanged.
    pub constant: bool,
}

impl ColumnScale {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(hi > lo) {
            let v = if lo.is_finite() { lo } else { 0.0 };
            return Self {
                min: v,
                max: v,
                constant: true,
            };
        }
        Self {
            min: lo,
            max: hi,
            constant: false,
        }
    }

    /// `dz/dx` of the forward map.
    pub fn slope(&self) -> f64 {
        if self.constant {
            1.0
        } else {
            2.0 / (self.max - self.min)
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        if self.constant {
            x
        } else {
            2.0 * (x - self.min) / (self.max - self.min) - 1.0
        }
    }

    pub fn invert(&self, z: f64) -> f64 {
        if self.constant {
            z
        } else {
            self.min + (z + 1.0) * 0.5 * (self.max - self.min)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub features: Vec<ColumnScale>,
    pub targets: Vec<ColumnScale>,
}

impl NormalizationSpec {
    /// Fits per-column scales; meant for the training split only.
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyInput("cannot fit normalization on no records".into()));
        }
        let nf = data.schema.feature_names.len();
        let np = data.schema.n_predict();
        Ok(Self {
            features: (0..nf)
                .map(|j| ColumnScale::fit(data.records.iter().map(|r| r.features[j])))
                .collect(),
            targets: (0..np)
                .map(|j| ColumnScale::fit(data.records.iter().map(|r| r.target[j])))
                .collect(),
        })
    }

    pub fn constant_features(&self) -> Vec<usize> {
        (0..self.features.len())
            .filter(|&j| self.features[j].constant)
            .collect()
    }

    pub fn normalize_features(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.features).map(|(&v, s)| s.apply(v)).collect()
    }

    pub fn normalize_targets(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.targets).map(|(&v, s)| s.apply(v)).collect()
    }

    pub fn denormalize_targets(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.targets).map(|(&v, s)| s.invert(v)).collect()
    }

    pub fn denormalize_features(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.features).map(|(&v, s)| s.invert(v)).collect()
    }

    /// Normalized copy of `data`; values outside the fitted range are not clipped.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if self.features.len() != data.schema.feature_names.len() || self.targets.len() != data.schema.n_predict() {
            return Err(Error::Shape("normalization does not match dataset schema".into()));
        }
        let mut out = data.clone();
        for r in &mut out.records {
            r.features = self.normalize_features(&r.features);
            r.target = self.normalize_targets(&r.target);
        }
        Ok(out)
    }

    /// Fits on `data` and returns the normalized copy.
    pub fn normalize(data: &Dataset) -> Result<(Dataset, Self)> {
        let spec = Self::fit(data)?;
        Ok((spec.apply(data)?, spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_range_onto_unit_interval() {
        let s = ColumnScale::fit([0.0, 4.0, 10.0]);
        assert_eq!(s.apply(0.0), -1.0);
        assert_eq!(s.apply(10.0), 1.0);
        assert!((s.invert(s.apply(3.7)) - 3.7).abs() <= 1e-12);
    }

    #[test]
    fn constant_column_is_flagged_and_identity() {
        let s = ColumnScale::fit([-5.0, -5.0]);
        assert!(s.constant);
        assert_eq!(s.apply(-5.0), -5.0);
    }

    #[test]
    fn out_of_range_values_are_not_clipped() {
        let s = ColumnScale::fit([0.0, 1.0]);
        assert_eq!(s.apply(2.0), 3.0);
        assert_eq!(s.apply(-1.0), -3.0);
    }
}
