use crate::error::{Error, Result};
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Flattened CART node; `feature == None` marks a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Mean target of the samples reaching this node.
    pub value: Vec<f64>,
    pub samples: usize,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => ((d as f64).sqrt().ceil() as usize).clamp(1, d),
            MaxFeatures::Count(k) => k.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 5,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

/// Axis-aligned regression tree; `x <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [Vec<f64>],
    /// Split-criterion weight per output (inverse variance).
    w: Vec<f64>,
    params: TreeParams,
    rng: &'a mut ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn mean(&self, idx: &[usize]) -> Vec<f64> {
        let k = self.y[0].len();
        let mut m = vec![0.0; k];
        for &i in idx {
            for (mj, yj) in m.iter_mut().zip(&self.y[i]) {
                *mj += yj;
            }
        }
        m.iter_mut().for_each(|v| *v /= idx.len() as f64);
        m
    }

    /// Best `(feature, threshold, weighted SSE)` among a random feature subset.
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let d = self.x[0].len();
        let k = self.y[0].len();
        let n = idx.len();
        let min_leaf = self.params.min_leaf.max(1);
        if n < 2 * min_leaf {
            return None;
        }
        let m = self.params.max_features.resolve(d);
        let mut features: Vec<usize> = sample(self.rng, d, m).into_vec();
        features.sort_unstable();
        let total: Vec<f64> = (0..k).map(|j| idx.iter().map(|&i| self.y[i][j]).sum()).collect();
        let total_sq: f64 = (0..k)
            .map(|j| self.w[j] * idx.iter().map(|&i| self.y[i][j] * self.y[i][j]).sum::<f64>())
            .sum();
        let parent = total_sq - (0..k).map(|j| self.w[j] * total[j] * total[j]).sum::<f64>() / n as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left = vec![0.0; k];
            for p in 0..n - 1 {
                let i = order[p];
                for (lj, yj) in left.iter_mut().zip(&self.y[i]) {
                    *lj += yj;
                }
                let nl = p + 1;
                let (a, b) = (self.x[i][f], self.x[order[p + 1]][f]);
                if nl < min_leaf || n - nl < min_leaf || !(b > a) {
                    continue;
                }
                // SSE = Σy² - Σ_side (Σy)²/n_side; only the subtracted part varies.
                let gain: f64 = (0..k)
                    .map(|j| {
                        let r = total[j] - left[j];
                        self.w[j] * (left[j] * left[j] / nl as f64 + r * r / (n - nl) as f64)
                    })
                    .sum();
                let sse = total_sq - gain;
                if best.is_none_or(|(_, _, s)| sse < s) {
                    let mid = a + (b - a) / 2.0;
                    let thr = if mid < b { mid } else { a };
                    best = Some((f, thr, sse));
                }
            }
        }
        match best {
            Some((f, t, sse)) if sse < parent - 1e-12 * parent.abs().max(1e-300) => Some((f, t)),
            _ => None,
        }
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let value = self.mean(&idx);
        self.nodes.push(Node {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            value,
            samples: idx.len(),
        });
        if self.params.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }
        if let Some((f, t)) = self.best_split(&idx) {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][f] <= t);
            let left = self.grow(l, depth + 1);
            let right = self.grow(r, depth + 1);
            let node = &mut self.nodes[id];
            node.feature = Some(f);
            node.threshold = t;
            node.left = left;
            node.right = right;
        }
        id
    }
}

impl DecisionTree {
    /// Fits on the rows `idx` of `x`/`y` (repeats allowed, e.g. a bootstrap).
    pub fn fit(
        x: &[Vec<f64>],
        y: &[Vec<f64>],
        idx: Vec<usize>,
        weights: Vec<f64>,
        params: TreeParams,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if idx.is_empty() || x.is_empty() {
            return Err(Error::Size("cannot fit a tree on no rows".into()));
        }
        let d = x[0].len();
        let mut b = Builder {
            x,
            y,
            w: weights,
            params,
            rng,
            nodes: Vec::new(),
        };
        b.grow(idx, 0);
        Ok(Self {
            nodes: b.nodes,
            n_features: d,
        })
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while let Some(f) = self.nodes[i].feature {
            let n = &self.nodes[i];
            i = if x[f] <= n.threshold { n.left } else { n.right };
        }
        i
    }

    pub fn predict(&self, x: &[f64]) -> &[f64] {
        &self.nodes[self.leaf_index(x)].value
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match t.nodes[i].feature {
                None => 0,
                Some(_) => 1 + go(t, t.nodes[i].left).max(go(t, t.nodes[i].right)),
            }
        }
        go(self, 0)
    }

    /// Distinct features used by any split.
    pub fn split_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self.nodes.iter().filter_map(|n| n.feature).collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    pub fn leaf_sample_total(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.samples).sum()
    }
}
