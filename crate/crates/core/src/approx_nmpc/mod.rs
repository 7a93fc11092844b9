//! Approximate NMPC: a dense regressor from closed-loop features to the full
//! open-loop coefficient vector, trained on the coefficient MSE with an
//! optional hull-hinge penalty, plus violation reports and warm starts.

mod loss;
mod mlp;
mod train;

pub use loss::{loss_mse, ResafeLoss};
pub use mlp::{ForwardPass, Gradients, Mlp};
pub use train::{batch_objective, evaluate_objective, train, EpochStats, LossParts, TrainConfig};

use crate::dataset::{Dataset, DatasetSchema, NormalizationSpec};
use crate::envelope::{check_violations, equidistant_hull_maps, violation_statistics, ViolationReport, ViolationStats};
use crate::error::{Error, Result};
use crate::legendre::TrajectoryBundle;
use crate::ocp::{NlpProblem, OcpDefinition, OcpModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Trained regressor with everything needed to decode its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxNmpc {
    pub schema: DatasetSchema,
    pub normalization: NormalizationSpec,
    pub definition: OcpDefinition,
    pub regions: usize,
    pub config: TrainConfig,
    pub network: Mlp,
    pub curve: Vec<EpochStats>,
}

/// Hinge penalty for the constraints of `definition` on `schema`'s layout.
pub fn resafe_for(
    definition: &OcpDefinition,
    schema: &DatasetSchema,
    regions: usize,
    eps_tol: f64,
) -> Result<ResafeLoss> {
    ResafeLoss::new(
        schema.layout.clone(),
        definition.constraints()?,
        equidistant_hull_maps(schema.layout.order, regions)?,
        eps_tol,
    )
}

impl ApproxNmpc {
    /// Fits on `train_set` (raw units), selecting weights on `val_set`.
    pub fn fit(
        train_set: &Dataset,
        val_set: &Dataset,
        normalization: &NormalizationSpec,
        definition: &OcpDefinition,
        regions: usize,
        config: &TrainConfig,
    ) -> Result<Self> {
        let resafe = resafe_for(definition, &train_set.schema, regions, config.eps_tol)?;
        let (network, curve) = train(train_set, val_set, normalization, &resafe, config)?;
        Ok(Self {
            schema: train_set.schema.clone(),
            normalization: normalization.clone(),
            definition: definition.clone(),
            regions,
            config: config.clone(),
            network,
            curve,
        })
    }

    /// Physical coefficient vector for one feature vector.
    pub fn predict_coefficients(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.schema.feature_names.len() {
            return Err(Error::Shape(format!(
                "{} features, model expects {}",
                features.len(),
                self.schema.feature_names.len()
            )));
        }
        let z = self.network.predict(&self.normalization.normalize_features(features));
        Ok(self.normalization.denormalize_targets(&z))
    }

    pub fn predict_trajectory(&self, features: &[f64]) -> Result<TrajectoryBundle<f64>> {
        TrajectoryBundle::from_vector(&self.schema.layout, &self.predict_coefficients(features)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        if m.network.output_dim() != m.schema.n_predict() || m.network.input_dim() != m.schema.feature_names.len() {
            return Err(Error::Schema(
                "network dimensions disagree with the stored schema".into(),
            ));
        }
        if !m.network.is_finite() {
            return Err(Error::Schema("model holds non-finite weights".into()));
        }
        Ok(m)
    }
}

/// Solver initial guess from a predicted bundle, in decision-vector order.
pub fn export_warm_start(bundle: &TrajectoryBundle<f64>, nlp: &NlpProblem) -> Result<Vec<f64>> {
    let v = bundle.to_vector();
    let layout = nlp.layout();
    let names_match = bundle.splines().map(|s| s.signal()).eq(layout.signal_names());
    let shape_match = bundle
        .splines()
        .all(|s| s.sections() == layout.sections && s.order() == layout.order);
    if v.len() != nlp.n_vars() || !names_match || !shape_match {
        return Err(Error::Shape(format!(
            "bundle with {} coefficients does not match a problem of {} variables",
            v.len(),
            nlp.n_vars()
        )));
    }
    Ok(v)
}

/// Held-out error and violation figures of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub instances: usize,
    /// Mean squared coefficient error in normalized units, summed over outputs.
    pub mse: f64,
    /// Mean per-instance hinge penalty at `eps_tol`.
    pub ctcp: f64,
    pub eps_tol: f64,
    pub violations: ViolationStats,
    /// Violating instances per constraint name.
    pub by_constraint: Vec<(String, usize)>,
}

pub fn evaluate(model: &ApproxNmpc, test: &Dataset, eps_tol: f64) -> Result<EvalReport> {
    if test.schema != model.schema {
        return Err(Error::Schema("test set schema differs from the model's".into()));
    }
    let constraints = model.definition.constraints()?;
    let maps = equidistant_hull_maps(model.schema.layout.order, model.regions)?;
    let resafe = resafe_for(&model.definition, &model.schema, model.regions, eps_tol)?;
    let per: Vec<(f64, f64, ViolationReport)> = test
        .records
        .par_iter()
        .map(|r| {
            let alpha = model.predict_coefficients(&r.features)?;
            let z = model.normalization.normalize_targets(&alpha);
            let t = model.normalization.normalize_targets(&r.target);
            let se: f64 = z.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum();
            let bundle = TrajectoryBundle::from_vector(&model.schema.layout, &alpha)?;
            let report = check_violations(&bundle, &constraints, &maps, eps_tol, r.instance_id)?;
            Ok((se, resafe.instance(&alpha, None)?, report))
        })
        .collect::<Result<_>>()?;
    let n = per.len().max(1) as f64;
    let reports: Vec<ViolationReport> = per.iter().map(|p| p.2.clone()).collect();
    let by_constraint = constraints
        .iter()
        .map(|c| {
            let k = reports
                .iter()
                .filter(|r| r.entries.iter().any(|e| e.constraint == c.name && e.magnitude > 0.0))
                .count();
            (c.name.clone(), k)
        })
        .collect();
    Ok(EvalReport {
        instances: per.len(),
        mse: per.iter().map(|p| p.0).sum::<f64>() / n,
        ctcp: per.iter().map(|p| p.1).sum::<f64>() / n,
        eps_tol,
        violations: violation_statistics(&reports)?,
        by_constraint,
    })
}

/// Published figures carried as a reference column; never asserted.
pub const REFERENCE_BASELINE_MSE: f64 = 1.7e-4;
pub const REFERENCE_BASELINE_CTCP: f64 = 8.5e-3;
pub const REFERENCE_PENALIZED_MSE: f64 = 2.0e-4;
pub const REFERENCE_PENALIZED_CTCP: f64 = 4.9e-6;
pub const REFERENCE_PENALIZED_TOTAL: f64 = 2.05e-4;

/// Baseline versus penalized comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: EvalReport,
    pub penalized: EvalReport,
    /// Penalized count over baseline count.
    pub count_ratio: f64,
    /// Penalized magnitude over baseline magnitude.
    pub magnitude_ratio: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

impl Comparison {
    pub fn new(baseline: EvalReport, penalized: EvalReport) -> Self {
        let count_ratio = ratio(penalized.violations.count as f64, baseline.violations.count as f64);
        let magnitude_ratio = ratio(
            penalized.violations.total_magnitude,
            baseline.violations.total_magnitude,
        );
        Self {
            baseline,
            penalized,
            count_ratio,
            magnitude_ratio,
        }
    }

    /// `metric,baseline,penalized,reference_baseline,reference_penalized`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let (b, p) = (&self.baseline, &self.penalized);
        writeln!(w, "metric,baseline,penalized,reference_baseline,reference_penalized")?;
        writeln!(w, "instances,{},{},57632,57632", b.instances, p.instances)?;
        writeln!(
            w,
            "mse,{:.6e},{:.6e},{REFERENCE_BASELINE_MSE:e},{REFERENCE_PENALIZED_MSE:e}",
            b.mse, p.mse
        )?;
        writeln!(
            w,
            "ctcp,{:.6e},{:.6e},{REFERENCE_BASELINE_CTCP:e},{REFERENCE_PENALIZED_CTCP:e}",
            b.ctcp, p.ctcp
        )?;
        writeln!(
            w,
            "violating_instances,{},{},,556",
            b.violations.count, p.violations.count
        )?;
        writeln!(
            w,
            "violation_rate,{:.6e},{:.6e},,",
            b.violations.rate, p.violations.rate
        )?;
        writeln!(
            w,
            "violation_magnitude,{:.6e},{:.6e},,",
            b.violations.total_magnitude, p.violations.total_magnitude
        )?;
        Ok(())
    }
}
