use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Dense tanh network with a linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    /// `weights[l]` is `sizes[l+1] × sizes[l]`.
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

/// Parameter gradients, shaped like the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

/// Activations kept for the backward pass, one column per sample.
pub struct ForwardPass {
    layers: Vec<DMatrix<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &DMatrix<f64> {
        self.layers.last().expect("network has layers")
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(sizes: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let a = (6.0 / (w[0] + w[1]) as f64).sqrt();
            weights.push(DMatrix::from_fn(w[1], w[0], |_, _| rng.random_range(-a..a)));
            biases.push(DVector::zeros(w[1]));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("network has layers")
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// `x` holds one sample per column.
    pub fn forward(&self, x: DMatrix<f64>) -> ForwardPass {
        let last = self.weights.len() - 1;
        let mut layers = vec![x];
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w * layers.last().expect("input present");
            for mut col in z.column_iter_mut() {
                col += b;
            }
            if l < last {
                z.apply(|v| *v = v.tanh());
            }
            layers.push(z);
        }
        ForwardPass { layers }
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let pass = self.forward(DMatrix::from_column_slice(x.len(), 1, x));
        pass.output().column(0).iter().copied().collect()
    }

    /// Backpropagates `d_out` (∂L/∂output, same shape as the output).
    pub fn backward(&self, pass: &ForwardPass, d_out: DMatrix<f64>) -> Gradients {
        let nl = self.weights.len();
        let mut weights = Vec::with_capacity(nl);
        let mut biases = Vec::with_capacity(nl);
        let mut delta = d_out;
        for l in (0..nl).rev() {
            let a_prev = &pass.layers[l];
            weights.push(&delta * a_prev.transpose());
            biases.push(delta.column_sum());
            if l > 0 {
                let mut d = self.weights[l].transpose() * &delta;
                d.zip_apply(a_prev, |di, a| *di *= 1.0 - a * a);
                delta = d;
            }
        }
        weights.reverse();
        biases.reverse();
        Gradients { weights, biases }
    }

    /// Flat parameter view: weights then biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend(w.iter());
            p.extend(b.iter());
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::Shape(format!(
                "{} parameters, network has {}",
                p.len(),
                self.n_params()
            )));
        }
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut().chain(b.iter_mut()) {
                *v = p[k];
                k += 1;
            }
        }
        Ok(())
    }
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut p = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend(w.iter());
            p.extend(b.iter());
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[3, 4, 2], &mut rng).unwrap();
        let x = DMatrix::from_fn(3, 5, |i, j| ((i * 5 + j) as f64 * 0.7).sin());
        let loss = |n: &Mlp| n.forward(x.clone()).output().iter().map(|v| v * v).sum::<f64>();
        let pass = net.forward(x.clone());
        let g = net.backward(&pass, pass.output() * 2.0).flatten();
        let p0 = net.params();
        for i in 0..p0.len() {
            let mut n = net.clone();
            let mut p = p0.clone();
            p[i] += 1e-6;
            n.set_params(&p).unwrap();
            let up = loss(&n);
            p[i] -= 2e-6;
            n.set_params(&p).unwrap();
            let fd = (up - loss(&n)) / 2e-6;
            assert!(
                (fd - g[i]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "param {i}: {fd} vs {}",
                g[i]
            );
        }
    }
}
