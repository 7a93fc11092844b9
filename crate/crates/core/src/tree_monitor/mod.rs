//! Multi-output regression forests predicting closed-loop KPIs, and a
//! worst-case flagger on their solver-effort output.

mod tree;

pub use tree::{DecisionTree, MaxFeatures, Node, TreeParams};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 20,
            tree: TreeParams::default(),
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionForest {
    pub trees: Vec<DecisionTree>,
    pub seeds: Vec<u64>,
    pub feature_names: Vec<String>,
    pub output_names: Vec<String>,
    pub params: ForestParams,
}

impl RegressionForest {
    pub fn fit(
        x: &[Vec<f64>],
        y: &[Vec<f64>],
        feature_names: Vec<String>,
        output_names: Vec<String>,
        params: ForestParams,
    ) -> Result<Self> {
        let n = x.len();
        if n == 0 || params.n_trees == 0 {
            return Err(Error::Size("forest needs rows and at least one tree".into()));
        }
        if n < 2 * params.tree.min_leaf {
            return Err(Error::Size(format!(
                "{n} rows, need at least {}",
                2 * params.tree.min_leaf
            )));
        }
        if y.len() != n
            || x.iter().any(|r| r.len() != feature_names.len())
            || y.iter().any(|r| r.len() != output_names.len())
        {
            return Err(Error::Shape("feature or target matrix does not match the names".into()));
        }
        if x.iter().chain(y).flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite value in forest training data".into()));
        }
        let k = output_names.len();
        let weights: Vec<f64> = (0..k)
            .map(|j| {
                let m = y.iter().map(|r| r[j]).sum::<f64>() / n as f64;
                let v = y.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n as f64;
                if v > 0.0 {
                    1.0 / v
                } else {
                    1.0
                }
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let seeds: Vec<u64> = (0..params.n_trees).map(|_| rng.random()).collect();
        let trees = seeds
            .par_iter()
            .map(|&s| {
                let mut r = ChaCha8Rng::seed_from_u64(s);
                let idx: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| r.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit(x, y, idx, weights.clone(), params.tree, &mut r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            trees,
            seeds,
            feature_names,
            output_names,
            params,
        })
    }

    /// Fits `outputs` (KPI names) of `data` on all its features.
    pub fn fit_dataset(data: &Dataset, outputs: &[&str], params: ForestParams) -> Result<Self> {
        let x = data.feature_matrix();
        let cols = outputs.iter().map(|o| data.column(o)).collect::<Result<Vec<_>>>()?;
        let y: Vec<Vec<f64>> = (0..data.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        Self::fit(
            &x,
            &y,
            data.schema.feature_names.clone(),
            outputs.iter().map(|s| s.to_string()).collect(),
            params,
        )
    }

    /// Mean of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_names.len()];
        for t in &self.trees {
            for (o, v) in out.iter_mut().zip(t.predict(x)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v /= self.trees.len() as f64);
        out
    }

    /// Prediction after checking the caller's feature names against the schema.
    pub fn predict_named(&self, names: &[String], x: &[f64]) -> Result<Vec<f64>> {
        for (i, f) in self.feature_names.iter().enumerate() {
            if names.get(i) != Some(f) {
                return Err(Error::Schema(format!("feature `{f}` expected at position {i}")));
            }
        }
        if names.len() != self.feature_names.len() {
            return Err(Error::Schema(format!(
                "unknown feature `{}`",
                names[self.feature_names.len()]
            )));
        }
        Ok(self.predict(x))
    }

    pub fn predict_batch(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.par_iter().map(|r| self.predict(r)).collect()
    }

    pub fn output_index(&self, name: &str) -> Result<usize> {
        self.output_names
            .iter()
            .position(|o| o == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Per-output mean squared error on `(x, y)`.
    pub fn mse(&self, x: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<f64> {
        let pred = self.predict_batch(x);
        let k = self.output_names.len();
        (0..k)
            .map(|j| pred.iter().zip(y).map(|(p, t)| (p[j] - t[j]).powi(2)).sum::<f64>() / y.len().max(1) as f64)
            .collect()
    }
}

/// Per-output MSE of predicting the mean of `train` for every row of `y`.
pub fn mean_predictor_mse(train: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<f64> {
    let k = train.first().map_or(0, |r| r.len());
    (0..k)
        .map(|j| {
            let m = train.iter().map(|r| r[j]).sum::<f64>() / train.len() as f64;
            y.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / y.len().max(1) as f64
        })
        .collect()
}

/// Linear-interpolation quantile of `values` (`q` in `[0, 1]`).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// One flagged stream element, carrying the handle for an attribution request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseFlag {
    pub index: usize,
    pub predicted: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseMonitor {
    pub output: usize,
    pub quantile: f64,
    pub threshold: f64,
}

impl WorstCaseMonitor {
    /// Threshold at the `q`-quantile of the training values of `output`.
    pub fn fit(forest: &RegressionForest, output: &str, training_values: &[f64], q: f64) -> Result<Self> {
        if training_values.is_empty() {
            return Err(Error::EmptyInput("no training values for the threshold".into()));
        }
        Ok(Self {
            output: forest.output_index(output)?,
            quantile: q,
            threshold: quantile(training_values, q),
        })
    }

    /// Flags elements whose prediction exceeds the threshold.
    pub fn flag(&self, forest: &RegressionForest, stream: &[Vec<f64>]) -> Vec<WorstCaseFlag> {
        stream
            .iter()
            .enumerate()
            .filter_map(|(index, x)| {
                let predicted = forest.predict(x)[self.output];
                (predicted > self.threshold).then_some(WorstCaseFlag {
                    index,
                    predicted,
                    threshold: self.threshold,
                })
            })
            .collect()
    }
}

/// `timestamp,K1_pred,K1_true,K2_pred,K2_true,flagged` for each record of `data`.
///
/// The forest's outputs must include `K1` and `k2` (either `K2_ms` or `K2_iters`).
pub fn write_monitor_report<W: Write>(
    mut w: W,
    forest: &RegressionForest,
    monitor: &WorstCaseMonitor,
    data: &Dataset,
    k2: &str,
) -> Result<()> {
    let i1 = forest.output_index("K1")?;
    let i2 = forest.output_index(k2)?;
    let flags = monitor.flag(forest, &data.feature_matrix());
    let mut flagged = vec![false; data.len()];
    for f in &flags {
        flagged[f.index] = true;
    }
    writeln!(w, "timestamp,K1_pred,K1_true,K2_pred,K2_true,flagged")?;
    for (r, fl) in data.records.iter().zip(flagged) {
        let p = forest.predict(&r.features);
        writeln!(
            w,
            "{:.6},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.timestamp,
            p[i1],
            r.k1,
            p[i2],
            r.kpi(k2).unwrap_or(f64::NAN),
            fl as u8
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y = x
            .iter()
            .map(|r| vec![r[0] * 2.0 + r[1].sin(), (r[0] * r[1]).abs()])
            .collect();
        (x, y)
    }

    fn names(k: usize, p: &str) -> Vec<String> {
        (0..k).map(|i| format!("{p}{i}")).collect()
    }

    #[test]
    fn constant_targets_predict_the_constant() {
        let (x, _) = toy(50);
        let y = vec![vec![3.5, -1.0]; 50];
        let f = RegressionForest::fit(&x, &y, names(3, "x"), names(2, "y"), ForestParams::default()).unwrap();
        assert_eq!(f.predict(&[0.1, 0.2, 0.3]), vec![3.5, -1.0]);
    }

    #[test]
    fn single_deep_tree_interpolates() {
        let (x, y) = toy(80);
        let p = ForestParams {
            n_trees: 1,
            bootstrap: false,
            tree: TreeParams {
                max_depth: None,
                min_leaf: 1,
                max_features: MaxFeatures::All,
            },
            seed: 0,
        };
        let f = RegressionForest::fit(&x, &y, names(3, "x"), names(2, "y"), p).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(&f.predict(xi), yi);
        }
        assert_eq!(f.trees[0].leaf_sample_total(), 80);
    }

    #[test]
    fn forest_is_mean_of_trees_and_seeded() {
        let (x, y) = toy(200);
        let p = ForestParams::default();
        let f = RegressionForest::fit(&x, &y, names(3, "x"), names(2, "y"), p).unwrap();
        assert_eq!(
            f,
            RegressionForest::fit(&x, &y, names(3, "x"), names(2, "y"), p).unwrap()
        );
        let q = [0.3, -0.2, 0.9];
        let mean: Vec<f64> = (0..2)
            .map(|j| f.trees.iter().map(|t| t.predict(&q)[j]).sum::<f64>() / f.trees.len() as f64)
            .collect();
        assert_eq!(f.predict(&q), mean);
        for t in &f.trees {
            assert_eq!(t.leaf_sample_total(), 200);
        }
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[5.0, 1.0], 1.0), 5.0);
    }

    #[test]
    fn unknown_feature_is_schema_error() {
        let (x, y) = toy(50);
        let f = RegressionForest::fit(&x, &y, names(3, "x"), names(2, "y"), ForestParams::default()).unwrap();
        let mut n = names(3, "x");
        n.push("extra".into());
        assert!(matches!(f.predict_named(&n, &[0.0; 4]), Err(Error::Schema(_))));
        assert!(f.predict_named(&names(3, "x"), &[0.0; 3]).is_ok());
    }
}
