use super::loss::ResafeLoss;
use super::mlp::{Gradients, Mlp};
use crate::dataset::{Dataset, NormalizationSpec};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Weight of the hull-hinge term; 0 trains on the coefficient MSE alone.
    pub gamma: f64,
    pub eps_tol: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// The learning rate halves every this many epochs.
    pub decay_every: usize,
    /// Global gradient-norm cap.
    pub clip_norm: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            eps_tol: 1e-3,
            batch_size: 64,
            epochs: 60,
            learning_rate: 0.01,
            momentum: 0.9,
            decay_every: 20,
            clip_norm: 10.0,
            hidden: vec![256, 128, 64],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::Domain(format!("gamma {} must be non-negative", self.gamma)));
        }
        if self.batch_size == 0 {
            return Err(Error::Domain("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Domain(
                "learning rate must be positive and momentum in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Batch objective `L_MSE + γ L_RESAFE` and its parts, averaged over batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub mse: f64,
    /// `None` when γ = 0 (the hinge term is never evaluated).
    pub resafe: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train: LossParts,
    pub validation: LossParts,
}

/// Normalized inputs and targets, one column per record.
pub(crate) struct Matrices {
    pub x: DMatrix<f64>,
    pub t: DMatrix<f64>,
}

pub(crate) fn matrices(data: &Dataset, spec: &NormalizationSpec, idx: &[usize]) -> Matrices {
    let nf = data.schema.feature_names.len();
    let np = data.schema.n_predict();
    let mut x = DMatrix::zeros(nf, idx.len());
    let mut t = DMatrix::zeros(np, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        let r = &data.records[i];
        x.set_column(c, &nalgebra::DVector::from_vec(spec.normalize_features(&r.features)));
        t.set_column(c, &nalgebra::DVector::from_vec(spec.normalize_targets(&r.target)));
    }
    Matrices { x, t }
}

/// Objective of one batch and, if asked, its parameter gradient.
pub fn batch_objective(
    net: &Mlp,
    x: &DMatrix<f64>,
    t: &DMatrix<f64>,
    spec: &NormalizationSpec,
    resafe: &ResafeLoss,
    gamma: f64,
    with_grad: bool,
) -> Result<(LossParts, Option<Gradients>)> {
    let b = x.ncols() as f64;
    let pass = net.forward(x.clone());
    let z = pass.output();
    let diff = z - t;
    let mse = diff.norm_squared() / b;
    let mut d_out = diff * (2.0 / b);
    let mut hinge = None;
    if gamma > 0.0 {
        let inv_slope: Vec<f64> = spec.targets.iter().map(|s| 1.0 / s.slope()).collect();
        let mut sum = 0.0;
        let mut g = vec![0.0; z.nrows()];
        for c in 0..z.ncols() {
            let zc: Vec<f64> = z.column(c).iter().copied().collect();
            let alpha = spec.denormalize_targets(&zc);
            g.iter_mut().for_each(|v| *v = 0.0);
            sum += resafe.instance(&alpha, with_grad.then_some(&mut g[..]))?;
            if with_grad {
                for (r, (gi, s)) in g.iter().zip(&inv_slope).enumerate() {
                    d_out[(r, c)] += gamma * gi * s;
                }
            }
        }
        hinge = Some(sum);
    }
    let parts = LossParts {
        total: mse + gamma * hinge.unwrap_or(0.0),
        mse,
        resafe: hinge,
    };
    let grads = with_grad.then(|| net.backward(&pass, d_out));
    Ok((parts, grads))
}

fn batches(n: usize, size: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    (0..n.div_ceil(size)).map(move |k| k * size..((k + 1) * size).min(n))
}

fn accumulate(acc: &mut LossParts, p: &LossParts) {
    acc.total += p.total;
    acc.mse += p.mse;
    if let Some(r) = p.resafe {
        *acc.resafe.get_or_insert(0.0) += r;
    }
}

fn mean(acc: LossParts, k: usize) -> LossParts {
    let k = k.max(1) as f64;
    LossParts {
        total: acc.total / k,
        mse: acc.mse / k,
        resafe: acc.resafe.map(|r| r / k),
    }
}

fn zero_parts() -> LossParts {
    LossParts {
        total: 0.0,
        mse: 0.0,
        resafe: None,
    }
}

/// Batch-averaged objective over `data` in order.
pub fn evaluate_objective(
    net: &Mlp,
    data: &Dataset,
    spec: &NormalizationSpec,
    resafe: &ResafeLoss,
    gamma: f64,
    batch_size: usize,
) -> Result<LossParts> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let m = matrices(data, spec, &idx);
    let mut acc = zero_parts();
    let mut k = 0;
    for r in batches(idx.len(), batch_size) {
        let x = m.x.columns(r.start, r.len()).into_owned();
        let t = m.t.columns(r.start, r.len()).into_owned();
        let (p, _) = batch_objective(net, &x, &t, spec, resafe, gamma, false)?;
        accumulate(&mut acc, &p);
        k += 1;
    }
    Ok(mean(acc, k))
}

/// Momentum SGD; returns the weights of the best validation epoch.
pub fn train(
    train_set: &Dataset,
    val_set: &Dataset,
    spec: &NormalizationSpec,
    resafe: &ResafeLoss,
    config: &TrainConfig,
) -> Result<(Mlp, Vec<EpochStats>)> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyInput(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sizes = vec![train_set.schema.feature_names.len()];
    sizes.extend(&config.hidden);
    sizes.push(train_set.schema.n_predict());
    let mut net = Mlp::new(&sizes, &mut rng)?;
    let all: Vec<usize> = (0..train_set.len()).collect();
    let m = matrices(train_set, spec, &all);
    let mut velocity = vec![0.0; net.n_params()];
    let mut order = all.clone();
    let mut best: Option<(f64, Mlp)> = None;
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.learning_rate * 0.5f64.powi((epoch / config.decay_every.max(1)) as i32);
        order.shuffle(&mut rng);
        let mut acc = zero_parts();
        let mut k = 0;
        for r in batches(order.len(), config.batch_size) {
            let cols = &order[r];
            let x = m.x.select_columns(cols);
            let t = m.t.select_columns(cols);
            let (p, g) = batch_objective(&net, &x, &t, spec, resafe, config.gamma, true)?;
            if !p.total.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            accumulate(&mut acc, &p);
            k += 1;
            let mut g = g.expect("gradient requested").flatten();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > config.clip_norm {
                let s = config.clip_norm / norm;
                g.iter_mut().for_each(|v| *v *= s);
            }
            let mut params = net.params();
            for ((p, v), gi) in params.iter_mut().zip(velocity.iter_mut()).zip(&g) {
                *v = config.momentum * *v - lr * gi;
                *p += *v;
            }
            net.set_params(&params)?;
        }
        let train_parts = mean(acc, k);
        let val = evaluate_objective(&net, val_set, spec, resafe, config.gamma, config.batch_size)?;
        if !val.total.is_finite() || !net.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        curve.push(EpochStats {
            epoch,
            learning_rate: lr,
            train: train_parts,
            validation: val,
        });
        if best.as_ref().is_none_or(|(v, _)| val.total < *v) {
            best = Some((val.total, net.clone()));
        }
    }
    let net = best.map(|(_, n)| n).unwrap_or(net);
    Ok((net, curve))
}
