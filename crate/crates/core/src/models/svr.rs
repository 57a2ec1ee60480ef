//! ε-insensitive support vector regression with an RBF kernel.
//!
//! The dual is solved in the 2N-variable form
//!
//! ```text
//! min  ½ aᵀ Q a + pᵀ a   s.t.  sᵀ a = 0,  0 ≤ a ≤ C
//! ```
//!
//! where `a = [α; α*]`, `s = [+1…; −1…]`, `p = [ε − y; ε + y]` and
//! `Q_tu = s_t s_u K(x_t, x_u)`. Each SMO step updates the maximal
//! KKT-violating pair. The fitted coefficients are `β = α − α*`.

use std::borrow::Cow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fit_columns, Standardizer};
use crate::error::{Error, Result};
use crate::ingest::{FeatureRow, WINDOW_LEN};

/// Coefficients with magnitude at or below this are not kept as support vectors.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Above this many rows the kernel is evaluated row by row instead of cached.
const DENSE_GRAM_LIMIT: usize = 4096;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    pub c: f64,
    pub epsilon: f64,
    /// `None` selects `1 / (6 * mean standardised feature variance)`.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    /// Iteration budget in units of `2N` pair updates.
    pub max_passes: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            c: 1.0,
            epsilon: 0.1,
            gamma: None,
            tolerance: 1e-3,
            max_passes: 100,
        }
    }
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    /// Standardised support vectors.
    pub support_vectors: Vec<FeatureRow>,
    /// `α_i − α_i*` for each support vector.
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub epsilon: f64,
    pub input_scalers: Vec<Standardizer>,
    pub target_scaler: Standardizer,
    /// False when the solver hit its iteration budget before the KKT tolerance.
    pub converged: bool,
}

impl SvrModel {
    /// Decision value in standardised target units.
    pub fn decision(&self, z: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coeffs)
            .map(|(sv, c)| c * rbf(z, sv, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), WINDOW_LEN, "input width mismatch");
        let mut z = [0.0; WINDOW_LEN];
        for ((dst, v), s) in z.iter_mut().zip(x).zip(&self.input_scalers) {
            *dst = s.apply(*v);
        }
        self.target_scaler.invert(self.decision(&z))
    }
}

pub fn predict_svr(model: &SvrModel, x: &[f64]) -> f64 {
    model.predict(x)
}

/// Kernel matrix access for the dual solver.
pub enum Gram<'a> {
    Dense { n: usize, values: Vec<f64> },
    Rbf { points: &'a [FeatureRow], gamma: f64 },
}

impl<'a> Gram<'a> {
    /// RBF Gram matrix, cached in full for moderate sizes.
    pub fn rbf(points: &'a [FeatureRow], gamma: f64) -> Self {
        let n = points.len();
        if n > DENSE_GRAM_LIMIT {
            return Gram::Rbf { points, gamma };
        }
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in 0..i {
                let k = rbf(&points[i], &points[j], gamma);
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        Gram::Dense { n, values }
    }

    pub fn len(&self) -> usize {
        match self {
            Gram::Dense { n, .. } => *n,
            Gram::Rbf { points, .. } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> Cow<'_, [f64]> {
        match self {
            Gram::Dense { n, values } => Cow::Borrowed(&values[i * n..(i + 1) * n]),
            Gram::Rbf { points, gamma } => {
                Cow::Owned(points.iter().map(|p| rbf(&points[i], p, *gamma)).collect())
            }
        }
    }

    fn diag(&self, i: usize) -> f64 {
        match self {
            Gram::Dense { n, values } => values[i * n + i],
            Gram::Rbf { .. } => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// `[α; α*]`, length `2N`.
    pub alpha: Vec<f64>,
    /// Decision function offset: `f(x) = Σ β_i K(x_i, x) − rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DualSolution {
    pub fn beta(&self) -> Vec<f64> {
        let n = self.alpha.len() / 2;
        (0..n).map(|i| self.alpha[i] - self.alpha[i + n]).collect()
    }
}

/// Solves the ε-SVR dual by SMO with maximal-violating-pair selection.
///
/// Candidates are scanned in a `seed`-shuffled order and only strictly
/// larger violations replace the current pick, so ties resolve by that
/// order. Stops when the violation gap is at most `tolerance` or after
/// `max_iter` pair updates.
pub fn solve_dual(
    gram: &Gram<'_>,
    y: &[f64],
    c: f64,
    epsilon: f64,
    tolerance: f64,
    max_iter: usize,
    seed: u64,
) -> DualSolution {
    let n = gram.len();
    assert_eq!(y.len(), n, "target length mismatch");
    let l = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let mut alpha = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l)
        .map(|t| if t < n { epsilon - y[t] } else { epsilon + y[t - n] })
        .collect();
    let mut order: Vec<usize> = (0..l).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let converged = loop {
        // i maximises -s_t G_t over I_up; j minimises it over I_low.
        let mut g_max = f64::NEG_INFINITY;
        let mut g_min = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for &t in &order {
            let v = -sign(t) * grad[t];
            let up = if t < n { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            let low = if t < n { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
            if up && v > g_max {
                g_max = v;
                i = t;
            }
            if low && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min <= tolerance {
            break true;
        }
        if iterations >= max_iter {
            break false;
        }
        iterations += 1;

        let (si, sj) = (sign(i), sign(j));
        let (ki, kj) = (i % n, j % n);
        let row_i = gram.row(ki);
        let row_j = gram.row(kj);
        let q_ij = si * sj * row_i[kj];
        let (old_i, old_j) = (alpha[i], alpha[j]);

        if si != sj {
            let quad = (gram.diag(ki) + gram.diag(kj) + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (gram.diag(ki) + gram.diag(kj) - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (d_i, d_j) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..l {
            let st = sign(t);
            let k = t % n;
            grad[t] += st * (si * row_i[k] * d_i + sj * row_j[k] * d_j);
        }
    };

    let rho = offset(&alpha, &grad, n, c);
    DualSolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

fn offset(alpha: &[f64], grad: &[f64], n: usize, c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let s = if t < n { 1.0 } else { -1.0 };
        let yg = s * grad[t];
        if alpha[t] >= c {
            if s < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if s > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_n += 1;
            free_sum += yg;
        }
    }
    if free_n > 0 {
        free_sum / free_n as f64
    } else {
        0.5 * (ub + lb)
    }
}

fn default_gamma(z: &[FeatureRow]) -> f64 {
    let n = z.len() as f64;
    let mean_var = (0..WINDOW_LEN)
        .map(|f| {
            let m = z.iter().map(|r| r[f]).sum::<f64>() / n;
            z.iter().map(|r| (r[f] - m).powi(2)).sum::<f64>() / n
        })
        .sum::<f64>()
        / WINDOW_LEN as f64;
    if mean_var > 0.0 {
        1.0 / (WINDOW_LEN as f64 * mean_var)
    } else {
        1.0 / WINDOW_LEN as f64
    }
}

/// Fits an ε-SVR on standardised inputs and targets.
///
/// Constant targets are allowed and yield a model with no support vectors
/// that predicts the constant.
pub fn train_svr(x: &[FeatureRow], y: &[f64], cfg: &SvrConfig, seed: u64) -> Result<SvrModel> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "svr needs at least 2 rows, got {}",
            x.len()
        )));
    }
    if !(cfg.c > 0.0) || !(cfg.epsilon >= 0.0) || !(cfg.tolerance > 0.0) || cfg.max_passes == 0 {
        return Err(Error::Config(
            "svr needs C > 0, epsilon >= 0, tolerance > 0 and max_passes > 0".into(),
        ));
    }
    if let Some(g) = cfg.gamma {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {g}")));
        }
    }
    let input_scalers = fit_columns(x);
    let target_scaler = Standardizer::fit_or_unit(y);
    let z: Vec<FeatureRow> = x
        .iter()
        .map(|r| {
            let mut out = [0.0; WINDOW_LEN];
            for ((o, v), s) in out.iter_mut().zip(r).zip(&input_scalers) {
                *o = s.apply(*v);
            }
            out
        })
        .collect();
    let ys: Vec<f64> = y.iter().map(|v| target_scaler.apply(*v)).collect();
    let gamma = cfg.gamma.unwrap_or_else(|| default_gamma(&z));

    let gram = Gram::rbf(&z, gamma);
    let max_iter = cfg.max_passes.saturating_mul(2 * z.len());
    let sol = solve_dual(&gram, &ys, cfg.c, cfg.epsilon, cfg.tolerance, max_iter, seed);

    let (support_vectors, dual_coeffs) = sol
        .beta()
        .into_iter()
        .zip(&z)
        .filter(|(b, _)| b.abs() > SUPPORT_THRESHOLD)
        .map(|(b, r)| (*r, b))
        .unzip();
    Ok(SvrModel {
        support_vectors,
        dual_coeffs,
        bias: -sol.rho,
        gamma,
        c: cfg.c,
        epsilon: cfg.epsilon,
        input_scalers,
        target_scaler,
        converged: sol.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Vec<Standardizer> {
        vec![Standardizer { mean: 0.0, sd: 1.0 }; WINDOW_LEN]
    }

    fn model(svs: Vec<FeatureRow>, coeffs: Vec<f64>, bias: f64) -> SvrModel {
        SvrModel {
            support_vectors: svs,
            dual_coeffs: coeffs,
            bias,
            gamma: 0.7,
            c: 1.0,
            epsilon: 0.1,
            input_scalers: unit(),
            target_scaler: Standardizer { mean: 0.0, sd: 1.0 },
            converged: true,
        }
    }

    #[test]
    fn constant_target_has_no_support_vectors() {
        let x: Vec<FeatureRow> = (0..12).map(|i| [i as f64, 1.0, 2.0, (i % 3) as f64, 0.0, 5.0]).collect();
        for eps in [0.0, 0.1] {
            let cfg = SvrConfig {
                epsilon: eps,
                ..SvrConfig::default()
            };
            let m = train_svr(&x, &[417.25; 12], &cfg, 0).unwrap();
            assert!(m.support_vectors.is_empty());
            assert_eq!(m.bias, 0.0);
            assert!(x.iter().all(|r| m.predict(r) == 417.25));
        }
    }

    #[test]
    fn bias_only_and_lone_vector() {
        assert_eq!(model(vec![], vec![], 0.25).predict(&[3.0; 6]), 0.25);
        let sv = [0.5, -1.0, 2.0, 0.0, 1.0, 3.0];
        assert_eq!(model(vec![sv], vec![1.0], 0.25).predict(&sv), 1.25);
    }

    #[test]
    fn support_vector_order_is_irrelevant() {
        let svs = vec![[0.1; 6], [0.5; 6], [-0.3; 6]];
        let a = model(svs.clone(), vec![0.3, -0.5, 0.2], 0.1);
        let b = model(svs.into_iter().rev().collect(), vec![0.2, -0.5, 0.3], 0.1);
        let x = [0.2, 0.1, 0.0, 0.3, 0.4, 0.2];
        assert!((a.predict(&x) - b.predict(&x)).abs() < 1e-15);
    }

    #[test]
    fn dual_feasibility_after_training() {
        let x: Vec<FeatureRow> = (0..60)
            .map(|i| {
                let t = i as f64 * 0.1;
                [t, t.sin(), t.cos(), (2.0 * t).sin(), t * t * 0.01, 1.0]
            })
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 415.0 + 3.0 * r[1] + r[0]).collect();
        let cfg = SvrConfig::default();
        let m = train_svr(&x, &y, &cfg, 4).unwrap();
        assert!(m.converged);
        assert!(m.dual_coeffs.iter().all(|c| c.abs() <= cfg.c + 1e-9));
        assert!(m.dual_coeffs.iter().sum::<f64>().abs() < 1e-6);
        let mae = x.iter().zip(&y).map(|(r, t)| (m.predict(r) - t).abs()).sum::<f64>() / 60.0;
        assert!(mae < 0.5, "{mae}");
    }

    #[test]
    fn explicit_gamma_is_used_and_validated() {
        let x: Vec<FeatureRow> = (0..5).map(|i| [i as f64; 6]).collect();
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let m = train_svr(&x, &y, &SvrConfig { gamma: Some(0.3), ..SvrConfig::default() }, 0).unwrap();
        assert_eq!(m.gamma, 0.3);
        assert!(train_svr(&x, &y, &SvrConfig { gamma: Some(0.0), ..SvrConfig::default() }, 0).is_err());
    }
}
