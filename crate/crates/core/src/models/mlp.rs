//! Single-hidden-layer feedforward network: tanh hidden units, linear output,
//! trained on z-scored inputs and targets with Adam mini-batch descent.
//!
//! Parameters live in one flat vector laid out as
//! `[W1 (hidden x inputs, row-major) | b1 (hidden) | w2 (hidden) | b2]`,
//! which is also the layout of the gradient returned by
//! [`Network::loss_and_gradient`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fit_columns, Standardizer};
use crate::error::{Error, Result};
use crate::ingest::{FeatureRow, WINDOW_LEN};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_units: 150,
            learning_rate: 1e-3,
            epochs: 300,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n_inputs: usize,
    n_hidden: usize,
    params: Vec<f64>,
}

impl Network {
    pub fn param_count(n_inputs: usize, n_hidden: usize) -> usize {
        n_hidden * n_inputs + 2 * n_hidden + 1
    }

    pub fn zeros(n_inputs: usize, n_hidden: usize) -> Self {
        Network {
            n_inputs,
            n_hidden,
            params: vec![0.0; Self::param_count(n_inputs, n_hidden)],
        }
    }

    pub fn from_params(n_inputs: usize, n_hidden: usize, params: Vec<f64>) -> Result<Self> {
        let want = Self::param_count(n_inputs, n_hidden);
        if params.len() != want {
            return Err(Error::LengthMismatch {
                left: params.len(),
                right: want,
            });
        }
        Ok(Network {
            n_inputs,
            n_hidden,
            params,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(n_inputs: usize, n_hidden: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(n_inputs, n_hidden);
        let l1 = (6.0 / (n_inputs + n_hidden) as f64).sqrt();
        let l2 = (6.0 / (n_hidden + 1) as f64).sqrt();
        let (w1, rest) = net.params.split_at_mut(n_hidden * n_inputs);
        for w in w1 {
            *w = rng.random_range(-l1..l1);
        }
        for w in &mut rest[n_hidden..2 * n_hidden] {
            *w = rng.random_range(-l2..l2);
        }
        net
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w1 = self.n_hidden * self.n_inputs;
        (w1, w1 + self.n_hidden, w1 + 2 * self.n_hidden)
    }

    /// Fills `hidden` with tanh activations and returns the linear output.
    fn forward_into(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let (b1, w2, b2) = self.offsets();
        let mut out = self.params[b2];
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &self.params[j * self.n_inputs..(j + 1) * self.n_inputs];
            let z = self.params[b1 + j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *h = z.tanh();
            out += self.params[w2 + j] * *h;
        }
        out
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n_inputs, "input width mismatch");
        let mut hidden = vec![0.0; self.n_hidden];
        self.forward_into(x, &mut hidden)
    }

    /// Mean squared error over a batch and its gradient w.r.t. every parameter.
    ///
    /// `xs` is row-major with `ys.len()` rows of width `n_inputs`.
    pub fn loss_and_gradient(&self, xs: &[f64], ys: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate_gradient(xs, ys, &mut grad);
        (loss, grad)
    }

    fn accumulate_gradient(&self, xs: &[f64], ys: &[f64], grad: &mut [f64]) -> f64 {
        assert_eq!(xs.len(), ys.len() * self.n_inputs, "batch shape mismatch");
        grad.fill(0.0);
        let (b1, w2, b2) = self.offsets();
        let batch = ys.len() as f64;
        let mut hidden = vec![0.0; self.n_hidden];
        let mut loss = 0.0;
        for (x, &y) in xs.chunks_exact(self.n_inputs).zip(ys) {
            let out = self.forward_into(x, &mut hidden);
            let err = out - y;
            loss += err * err;
            let d_out = 2.0 * err / batch;
            grad[b2] += d_out;
            for (j, &h) in hidden.iter().enumerate() {
                grad[w2 + j] += d_out * h;
                let d_z = d_out * self.params[w2 + j] * (1.0 - h * h);
                grad[b1 + j] += d_z;
                let row = &mut grad[j * self.n_inputs..(j + 1) * self.n_inputs];
                for (g, v) in row.iter_mut().zip(x) {
                    *g += d_z * v;
                }
            }
        }
        loss / batch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layer_sizes: [usize; 3],
    pub network: Network,
    pub input_scalers: Vec<Standardizer>,
    pub target_scaler: Standardizer,
}

impl MlpModel {
    pub fn new(network: Network, input_scalers: Vec<Standardizer>, target_scaler: Standardizer) -> Result<Self> {
        if input_scalers.len() != network.n_inputs() {
            return Err(Error::LengthMismatch {
                left: input_scalers.len(),
                right: network.n_inputs(),
            });
        }
        Ok(MlpModel {
            layer_sizes: [network.n_inputs(), network.n_hidden(), 1],
            network,
            input_scalers,
            target_scaler,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let z: Vec<f64> = x
            .iter()
            .zip(&self.input_scalers)
            .map(|(v, s)| s.apply(*v))
            .collect();
        self.target_scaler.invert(self.network.forward(&z))
    }
}

pub fn predict_mlp(model: &MlpModel, x: &[f64]) -> f64 {
    model.predict(x)
}

/// Trains a `6-hidden-1` network by minimising mean squared error on
/// standardised data. Deterministic given `seed`.
pub fn train_mlp(x: &[FeatureRow], y: &[f64], cfg: &MlpConfig, seed: u64) -> Result<MlpModel> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "network needs at least 2 rows, got {}",
            x.len()
        )));
    }
    if cfg.hidden_units == 0 || cfg.batch_size == 0 || cfg.epochs == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::Config(
            "hidden_units, batch_size, epochs and learning_rate must be positive".into(),
        ));
    }
    let target_scaler = Standardizer::fit(y).ok_or(Error::DegenerateTarget)?;
    let input_scalers = fit_columns(x);

    let xs: Vec<f64> = x
        .iter()
        .flat_map(|r| r.iter().zip(&input_scalers).map(|(v, s)| s.apply(*v)))
        .collect();
    let ys: Vec<f64> = y.iter().map(|v| target_scaler.apply(*v)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::glorot(WINDOW_LEN, cfg.hidden_units, &mut rng);
    let n_params = net.params.len();
    let (mut m, mut v, mut grad) = (vec![0.0; n_params], vec![0.0; n_params], vec![0.0; n_params]);
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..ys.len()).collect();
    let mut bx = Vec::with_capacity(cfg.batch_size * WINDOW_LEN);
    let mut by = Vec::with_capacity(cfg.batch_size);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.extend_from_slice(&xs[i * WINDOW_LEN..(i + 1) * WINDOW_LEN]);
                by.push(ys[i]);
            }
            net.accumulate_gradient(&bx, &by, &mut grad);
            step += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(step);
            let c2 = 1.0 - ADAM_BETA2.powi(step);
            for k in 0..n_params {
                m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * grad[k];
                v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * grad[k] * grad[k];
                net.params[k] -= cfg.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
    MlpModel::new(net, input_scalers, target_scaler)
}
