//! Evaluation metrics: accuracy, MAE, R², and histogram-based entropy,
//! Kullback-Leibler and Jensen-Shannon divergences (natural log, nats).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of shared histogram bins used by [`evaluate`] unless overridden.
pub const DEFAULT_BINS: usize = 50;

/// Additive smoothing applied to every bin before renormalising.
pub const SMOOTHING: f64 = 1e-10;

/// Widening applied to a zero-width sample range.
const DEGENERATE_WIDTH: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityDistribution {
    edges: Vec<f64>,
    probabilities: Vec<f64>,
}

impl ProbabilityDistribution {
    /// Builds a distribution from explicit edges and probabilities.
    ///
    /// Edges must be strictly increasing with one more entry than
    /// `probabilities`; probabilities must be positive and sum to one.
    pub fn new(edges: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() || edges.len() != probabilities.len() + 1 {
            return Err(Error::LengthMismatch {
                left: edges.len(),
                right: probabilities.len() + 1,
            });
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("bin edges must be strictly increasing".into()));
        }
        if probabilities.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Config("probabilities must be positive".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("probabilities sum to {total}, not 1")));
        }
        Ok(ProbabilityDistribution {
            edges,
            probabilities,
        })
    }

    /// Uniform-width distribution on `[0, B]` with the given probabilities.
    pub fn from_probabilities(probabilities: Vec<f64>) -> Result<Self> {
        let edges = (0..=probabilities.len()).map(|i| i as f64).collect();
        Self::new(edges, probabilities)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn n_bins(&self) -> usize {
        self.probabilities.len()
    }

    fn check_edges(&self, other: &Self) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::MismatchedEdges);
        }
        Ok(())
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy_pct: f64,
    pub mae_ppm: f64,
    pub r2: f64,
    pub kl_divergence: f64,
    pub js_divergence: f64,
    pub n_test: usize,
}

fn check_lengths(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    if y.len() < 2 {
        return Err(Error::InsufficientData("r2 needs at least 2 values".into()));
    }
    let y_mean = mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateReference);
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// `100 * (1 - mean(|y - ŷ| / y))`; every reference value must be positive.
pub fn accuracy_pct(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    if let Some(bad) = y.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPositiveReference(*bad));
    }
    let rel = y
        .iter()
        .zip(yhat)
        .map(|(a, b)| (a - b).abs() / a)
        .sum::<f64>()
        / y.len() as f64;
    Ok(100.0 * (1.0 - rel))
}

/// Histograms `a` and `b` on shared equal-width bins spanning both samples.
pub fn histogram_pair(
    a: &[f64],
    b: &[f64],
    n_bins: usize,
) -> Result<(ProbabilityDistribution, ProbabilityDistribution)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n_bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {n_bins}")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Config("histogram input must be finite".into()));
    }
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let mut hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        hi = lo + DEGENERATE_WIDTH;
    }
    let width = (hi - lo) / n_bins as f64;
    let mut edges: Vec<f64> = (0..n_bins).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);

    let histogram = |values: &[f64]| {
        let mut counts = vec![0usize; n_bins];
        for &v in values {
            let bin = (((v - lo) / width).floor() as usize).min(n_bins - 1);
            counts[bin] += 1;
        }
        let n = values.len() as f64;
        let norm = 1.0 + n_bins as f64 * SMOOTHING;
        counts
            .into_iter()
            .map(|c| (c as f64 / n + SMOOTHING) / norm)
            .collect::<Vec<_>>()
    };
    Ok((
        ProbabilityDistribution {
            edges: edges.clone(),
            probabilities: histogram(a),
        },
        ProbabilityDistribution {
            edges,
            probabilities: histogram(b),
        },
    ))
}

/// Shannon entropy `-Σ p ln p`.
pub fn entropy(p: &ProbabilityDistribution) -> f64 {
    -p.probabilities.iter().map(|&x| x * x.ln()).sum::<f64>()
}

/// `Σ p ln(p / q)`, floored at zero to absorb rounding on near-equal inputs.
pub fn kl_divergence(p: &ProbabilityDistribution, q: &ProbabilityDistribution) -> Result<f64> {
    p.check_edges(q)?;
    let d: f64 = p
        .probabilities
        .iter()
        .zip(&q.probabilities)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum();
    Ok(d.max(0.0))
}

/// Entropy of the mixture minus the mean entropy, `H((P+Q)/2) - (H(P)+H(Q))/2`.
pub fn js_divergence(p: &ProbabilityDistribution, q: &ProbabilityDistribution) -> Result<f64> {
    p.check_edges(q)?;
    let m = mixture(p, q);
    let d = entropy(&m) - 0.5 * (entropy(p) + entropy(q));
    Ok(d.clamp(0.0, std::f64::consts::LN_2))
}

pub(crate) fn mixture(p: &ProbabilityDistribution, q: &ProbabilityDistribution) -> ProbabilityDistribution {
    ProbabilityDistribution {
        edges: p.edges.clone(),
        probabilities: p
            .probabilities
            .iter()
            .zip(&q.probabilities)
            .map(|(a, b)| 0.5 * (a + b))
            .collect(),
    }
}

/// All five metrics for one method. KL is taken as KL(reference ‖ predicted).
pub fn evaluate(y: &[f64], yhat: &[f64], n_bins: usize) -> Result<MetricsReport> {
    let (p_ref, q_pred) = histogram_pair(y, yhat, n_bins)?;
    Ok(MetricsReport {
        accuracy_pct: accuracy_pct(y, yhat)?,
        mae_ppm: mae(y, yhat)?,
        r2: r2(y, yhat)?,
        kl_divergence: kl_divergence(&p_ref, &q_pred)?,
        js_divergence: js_divergence(&p_ref, &q_pred)?,
        n_test: y.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn dist(p: &[f64]) -> ProbabilityDistribution {
        ProbabilityDistribution::from_probabilities(p.to_vec()).unwrap()
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap(), 1.0);
        let m = mae(&[415.0, 417.0], &[393.49, 395.49]).unwrap();
        assert!((m - 21.51).abs() < 1e-9);
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(mae(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn r2_examples() {
        let y = [400.0, 401.0, 405.0];
        assert_eq!(r2(&y, &y).unwrap(), 1.0);
        let m = mean(&y);
        assert_eq!(r2(&y, &[m; 3]).unwrap(), 0.0);
        let v = r2(&[400.0, 400.2], &[420.0, 420.0]).unwrap();
        assert!((v - -39601.0).abs() < 1e-6 * 39601.0, "{v}");
        assert!(matches!(r2(&[3.0, 3.0], &[1.0, 2.0]), Err(Error::DegenerateReference)));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy_pct(&[415.0, 420.0], &[415.0, 420.0]).unwrap(), 100.0);
        let a = accuracy_pct(&[415.0], &[415.0 - 21.51]).unwrap();
        assert!((a - 94.816_867_469_879_5).abs() < 1e-9);
        let b = accuracy_pct(&[415.0], &[415.14]).unwrap();
        assert_eq!(format!("{b:.2}"), "99.97");
        assert!(matches!(
            accuracy_pct(&[0.0], &[1.0]),
            Err(Error::NonPositiveReference(_))
        ));
    }

    #[test]
    fn histogram_examples() {
        let a = [1.0, 2.0, 3.0, 3.5];
        let (p, q) = histogram_pair(&a, &a, 5).unwrap();
        assert_eq!(p, q);

        let (p, q) = histogram_pair(&[0.0, 0.0], &[1.0, 1.0], 2).unwrap();
        assert!((p.probabilities()[0] - 1.0).abs() < 1e-9 && p.probabilities()[1] < 1e-9);
        assert!((q.probabilities()[1] - 1.0).abs() < 1e-9 && q.probabilities()[0] < 1e-9);
        assert_eq!(p.edges(), &[0.0, 0.5, 1.0]);

        let (p, _) = histogram_pair(&[5.0, 5.0], &[5.0], 4).unwrap();
        assert!((p.edges()[4] - p.edges()[0] - 1e-9).abs() < 1e-15);
        assert!((p.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);

        assert!(matches!(histogram_pair(&[], &[1.0], 2), Err(Error::EmptyInput)));
        assert!(histogram_pair(&[1.0], &[1.0], 1).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&dist(&[0.5, 0.5])) - LN_2).abs() < 1e-12);
        let (p, _) = histogram_pair(&[1.0, 1.0], &[2.0], 10).unwrap();
        assert!(entropy(&p) < 1e-7);
        let h = 0.25 * 4f64.ln() + 0.75 * (4.0f64 / 3.0).ln();
        assert!((entropy(&dist(&[0.25, 0.75])) - h).abs() < 1e-12);
        assert!((h - 0.5623).abs() < 5e-5);
    }

    #[test]
    fn kl_examples() {
        let p = dist(&[0.5, 0.5]);
        let q = dist(&[0.25, 0.75]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert!((kl_divergence(&p, &q).unwrap() - 0.14384).abs() < 1e-5);
        let reverse = 0.25 * 0.5f64.ln() + 0.75 * 1.5f64.ln();
        assert!((kl_divergence(&q, &p).unwrap() - reverse).abs() < 1e-12);
        assert!((reverse - 0.13081).abs() < 1e-5);
        let other = ProbabilityDistribution::new(vec![0.0, 1.0, 3.0], vec![0.5, 0.5]).unwrap();
        assert!(matches!(kl_divergence(&p, &other), Err(Error::MismatchedEdges)));
    }

    #[test]
    fn js_examples() {
        let p = dist(&[0.5, 0.5]);
        assert_eq!(js_divergence(&p, &p).unwrap(), 0.0);
        let (a, b) = histogram_pair(&[0.0], &[1.0], 2).unwrap();
        assert!((js_divergence(&a, &b).unwrap() - LN_2).abs() < 1e-8);
        let q = dist(&[0.1, 0.9]);
        assert_eq!(js_divergence(&p, &q).unwrap(), js_divergence(&q, &p).unwrap());
    }

    #[test]
    fn distribution_validation() {
        assert!(ProbabilityDistribution::from_probabilities(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityDistribution::from_probabilities(vec![1.0, 0.0]).is_err());
        assert!(ProbabilityDistribution::new(vec![0.0, 0.0, 1.0], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn evaluate_perfect() {
        let y = [410.0, 412.0, 415.0, 418.0];
        let r = evaluate(&y, &y, DEFAULT_BINS).unwrap();
        assert_eq!(
            (r.accuracy_pct, r.mae_ppm, r.r2, r.kl_divergence, r.js_divergence, r.n_test),
            (100.0, 0.0, 1.0, 0.0, 0.0, 4)
        );
    }
}
