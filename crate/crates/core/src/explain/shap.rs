use crate::error::{Error, Result};
use crate::tree_monitor::{DecisionTree, RegressionForest};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapAttribution {
    pub instance_id: u64,
    pub output: String,
    /// Expected prediction over the background set.
    pub base_value: f64,
    pub prediction: f64,
    pub values: Vec<f64>,
}

impl ShapAttribution {
    /// `base + Σφ − prediction`.
    pub fn efficiency_gap(&self) -> f64 {
        self.base_value + self.values.iter().sum::<f64>() - self.prediction
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Source {
    Free,
    Foreground,
    Background,
}

struct Walk<'a> {
    tree: &'a DecisionTree,
    x: &'a [f64],
    z: &'a [f64],
    state: Vec<Source>,
    fg: Vec<usize>,
    bg: Vec<usize>,
    fact: &'a [f64],
}

impl Walk<'_> {
    /// Adds this background point's contribution into `phi[feature][output]`.
    fn go(&mut self, node: usize, phi: &mut [Vec<f64>]) {
        let n = &self.tree.nodes[node];
        let Some(f) = n.feature else {
            let (a, b) = (self.fg.len(), self.bg.len());
            if a + b == 0 {
                return;
            }
            if a > 0 {
                let w = self.fact[a - 1] * self.fact[b] / self.fact[a + b];
                for &i in &self.fg {
                    for (p, v) in phi[i].iter_mut().zip(&n.value) {
                        *p += w * v;
                    }
                }
            }
            if b > 0 {
                let w = self.fact[a] * self.fact[b - 1] / self.fact[a + b];
                for &j in &self.bg {
                    for (p, v) in phi[j].iter_mut().zip(&n.value) {
                        *p -= w * v;
                    }
                }
            }
            return;
        };
        let child = |v: f64| if v <= n.threshold { n.left } else { n.right };
        let (cx, cz) = (child(self.x[f]), child(self.z[f]));
        match self.state[f] {
            Source::Foreground => self.go(cx, phi),
            Source::Background => self.go(cz, phi),
            Source::Free if cx == cz => self.go(cx, phi),
            Source::Free => {
                self.state[f] = Source::Foreground;
                self.fg.push(f);
                self.go(cx, phi);
                self.fg.pop();
                self.state[f] = Source::Background;
                self.bg.push(f);
                self.go(cz, phi);
                self.bg.pop();
                self.state[f] = Source::Free;
            }
        }
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 2];
    for i in 1..f.len() {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

/// Interventional Shapley values of one tree against one background point,
/// as `phi[feature][output]` (accumulated).
pub fn tree_shap_single(tree: &DecisionTree, x: &[f64], z: &[f64], phi: &mut [Vec<f64>]) {
    let fact = factorials(tree.n_features);
    let mut w = Walk {
        tree,
        x,
        z,
        state: vec![Source::Free; tree.n_features],
        fg: Vec::new(),
        bg: Vec::new(),
        fact: &fact,
    };
    w.go(0, phi);
}

/// Exact interventional Shapley values of a forest against a background set.
#[derive(Debug, Clone)]
pub struct TreeExplainer<'a> {
    pub forest: &'a RegressionForest,
    pub background: Vec<Vec<f64>>,
    pub base: Vec<f64>,
}

/// Up to `cap` rows of `rows`, chosen under `seed` and kept in original order.
pub fn background_sample(rows: &[Vec<f64>], cap: usize, seed: u64) -> Vec<Vec<f64>> {
    if rows.len() <= cap {
        return rows.to_vec();
    }
    let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), rows.len(), cap).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| rows[i].clone()).collect()
}

impl<'a> TreeExplainer<'a> {
    pub fn new(forest: &'a RegressionForest, background: Vec<Vec<f64>>) -> Result<Self> {
        if background.is_empty() {
            return Err(Error::EmptyInput("background set is empty".into()));
        }
        let d = forest.feature_names.len();
        if background.iter().any(|r| r.len() != d) {
            return Err(Error::Schema(
                "background rows do not match the forest's features".into(),
            ));
        }
        let k = forest.output_names.len();
        let mut base = vec![0.0; k];
        for z in &background {
            for (b, p) in base.iter_mut().zip(forest.predict(z)) {
                *b += p;
            }
        }
        base.iter_mut().for_each(|b| *b /= background.len() as f64);
        Ok(Self {
            forest,
            background,
            base,
        })
    }

    /// `phi[output][feature]`.
    pub fn shap_values(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let d = self.forest.feature_names.len();
        if x.len() != d {
            return Err(Error::Schema(format!(
                "instance has {} features, forest uses {d}",
                x.len()
            )));
        }
        let k = self.forest.output_names.len();
        let mut phi = vec![vec![0.0; k]; d];
        for t in &self.forest.trees {
            for z in &self.background {
                tree_shap_single(t, x, z, &mut phi);
            }
        }
        let s = (self.forest.trees.len() * self.background.len()) as f64;
        Ok((0..k).map(|o| (0..d).map(|f| phi[f][o] / s).collect()).collect())
    }

    /// One attribution per forest output.
    pub fn explain(&self, instance_id: u64, x: &[f64]) -> Result<Vec<ShapAttribution>> {
        let phi = self.shap_values(x)?;
        let pred = self.forest.predict(x);
        Ok(phi
            .into_iter()
            .enumerate()
            .map(|(o, values)| ShapAttribution {
                instance_id,
                output: self.forest.output_names[o].clone(),
                base_value: self.base[o],
                prediction: pred[o],
                values,
            })
            .collect())
    }

    pub fn explain_many(&self, rows: &[(u64, Vec<f64>)]) -> Result<Vec<Vec<ShapAttribution>>> {
        rows.par_iter().map(|(id, x)| self.explain(*id, x)).collect()
    }
}

/// Exhaustive-coalition interventional Shapley values over `players`;
/// features outside `players` keep their foreground value.
pub fn brute_force_shap(
    predict: &dyn Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    background: &[Vec<f64>],
    players: &[usize],
) -> Vec<Vec<f64>> {
    let p = players.len();
    let k = predict(x).len();
    let fact = factorials(p);
    let value = |mask: usize| -> Vec<f64> {
        let mut acc = vec![0.0; k];
        for z in background {
            let mut h = x.to_vec();
            for (bit, &f) in players.iter().enumerate() {
                if mask & (1 << bit) == 0 {
                    h[f] = z[f];
                }
            }
            for (a, v) in acc.iter_mut().zip(predict(&h)) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= background.len() as f64);
        acc
    };
    let values: Vec<Vec<f64>> = (0..1usize << p).map(value).collect();
    let mut phi = vec![vec![0.0; x.len()]; k];
    for (bit, &f) in players.iter().enumerate() {
        for mask in 0..1usize << p {
            if mask & (1 << bit) != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = fact[s] * fact[p - s - 1] / fact[p];
            for o in 0..k {
                phi[o][f] += w * (values[mask | (1 << bit)][o] - values[mask][o]);
            }
        }
    }
    phi
}
