//! Exact Shapley attributions for forests, permutation importance for any
//! predictor, and beeswarm-ready summaries.

mod shap;

pub use shap::{background_sample, brute_force_shap, tree_shap_single, ShapAttribution, TreeExplainer};

use crate::approx_nmpc::ApproxNmpc;
use crate::error::{Error, Result};
use crate::tree_monitor::{ForestParams, RegressionForest};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Anything mapping a feature vector to outputs.
pub trait Predictor: Sync {
    fn predict(&self, x: &[f64]) -> Vec<f64>;
}

impl Predictor for RegressionForest {
    fn predict(&self, x: &[f64]) -> Vec<f64> {
        RegressionForest::predict(self, x)
    }
}

impl Predictor for ApproxNmpc {
    fn predict(&self, x: &[f64]) -> Vec<f64> {
        let z = self.network.predict(&self.normalization.normalize_features(x));
        self.normalization.denormalize_targets(&z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub baseline_mse: f64,
    /// Mean MSE increase per feature over the repeats.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// MSE increase of `output` after shuffling each column, `repeats` times.
pub fn permutation_importance(
    model: &dyn Predictor,
    x: &[Vec<f64>],
    y: &[f64],
    output: usize,
    repeats: usize,
    seed: u64,
) -> Result<Importance> {
    if x.len() < 100 {
        return Err(Error::Size(format!(
            "{} rows, permutation importance needs 100",
            x.len()
        )));
    }
    if y.len() != x.len() {
        return Err(Error::Shape("target length differs from row count".into()));
    }
    let mse = |rows: &[Vec<f64>]| -> f64 {
        rows.iter()
            .zip(y)
            .map(|(r, t)| (model.predict(r)[output] - t).powi(2))
            .sum::<f64>()
            / rows.len() as f64
    };
    let base = mse(x);
    let d = x[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    for f in 0..d {
        let mut incs = Vec::with_capacity(repeats);
        for _ in 0..repeats.max(1) {
            let mut col: Vec<f64> = x.iter().map(|r| r[f]).collect();
            col.shuffle(&mut rng);
            let rows: Vec<Vec<f64>> = x
                .iter()
                .zip(&col)
                .map(|(r, &v)| {
                    let mut r = r.clone();
                    r[f] = v;
                    r
                })
                .collect();
            incs.push(mse(&rows) - base);
        }
        let m = incs.iter().sum::<f64>() / incs.len() as f64;
        mean[f] = m;
        std[f] = (incs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / incs.len() as f64).sqrt();
    }
    Ok(Importance {
        baseline_mse: base,
        mean,
        std,
    })
}

/// Average ranks (ties share the mean rank), 1-based.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Re-fits a forest on `model`'s own predictions, so tree Shapley values can
/// stand in for a non-tree model (an approximation of it, not the model).
pub fn distill(
    model: &dyn Predictor,
    x: &[Vec<f64>],
    outputs: &[usize],
    feature_names: Vec<String>,
    output_names: Vec<String>,
    params: ForestParams,
) -> Result<RegressionForest> {
    let y: Vec<Vec<f64>> = x
        .iter()
        .map(|r| {
            let p = model.predict(r);
            outputs.iter().map(|&o| p[o]).collect()
        })
        .collect();
    RegressionForest::fit(x, &y, feature_names, output_names, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoint {
    pub instance_id: u64,
    pub shap_value: f64,
    /// Feature value min-max scaled to `[0, 1]` over the explained rows.
    pub feature_value_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub feature: String,
    pub rank: usize,
    pub mean_abs_shap: f64,
    pub points: Vec<SummaryPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub model: String,
    pub output: String,
    pub rows: Vec<SummaryRow>,
}

/// Per-feature rows sorted by mean |φ| (descending) for `output`.
pub fn shap_summary(
    explainer: &TreeExplainer<'_>,
    model: &str,
    rows: &[(u64, Vec<f64>)],
    output: &str,
) -> Result<ShapSummary> {
    let o = explainer.forest.output_index(output)?;
    let attrs = explainer.explain_many(rows)?;
    let d = explainer.forest.feature_names.len();
    let n = rows.len().max(1) as f64;
    let mut out: Vec<SummaryRow> = (0..d)
        .map(|f| {
            let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (_, x)| {
                (l.min(x[f]), h.max(x[f]))
            });
            let points = rows
                .iter()
                .zip(&attrs)
                .map(|((id, x), a)| SummaryPoint {
                    instance_id: *id,
                    shap_value: a[o].values[f],
                    feature_value_normalized: if hi > lo { (x[f] - lo) / (hi - lo) } else { 0.5 },
                })
                .collect::<Vec<_>>();
            SummaryRow {
                feature: explainer.forest.feature_names[f].clone(),
                rank: 0,
                mean_abs_shap: points.iter().map(|p| p.shap_value.abs()).sum::<f64>() / n,
                points,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.mean_abs_shap
            .total_cmp(&a.mean_abs_shap)
            .then(a.feature.cmp(&b.feature))
    });
    for (i, r) in out.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(ShapSummary {
        model: model.to_string(),
        output: output.to_string(),
        rows: out,
    })
}

impl ShapSummary {
    /// `feature,rank,mean_abs_shap,instance_id,shap_value,feature_value_normalized`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "feature,rank,mean_abs_shap,instance_id,shap_value,feature_value_normalized"
        )?;
        for r in &self.rows {
            for p in &r.points {
                writeln!(
                    w,
                    "{},{},{:.16e},{},{:.16e},{:.16e}",
                    r.feature, r.rank, r.mean_abs_shap, p.instance_id, p.shap_value, p.feature_value_normalized
                )?;
            }
        }
        Ok(())
    }

    pub fn top(&self, k: usize) -> Vec<&str> {
        self.rows.iter().take(k).map(|r| r.feature.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_of_monotone_map_is_one() {
        let a = [1.0, 5.0, 2.0, 8.0];
        let b: Vec<f64> = a.iter().map(|v: &f64| v.powi(3)).collect();
        assert!((spearman(&a, &b) - 1.0).abs() < 1e-15);
        assert_eq!(ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
    }
}
