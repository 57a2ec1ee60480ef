//! Bootstrap-aggregated regression forest and the estimator-count sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{train_tree, TreeConfig, TreeNode};
use crate::error::{Error, Result};
use crate::ingest::{AlignedExample, FeatureRow, WINDOW_LEN};
use crate::metrics::{self, MetricsReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub bootstrap: bool,
    pub max_features: usize,
    pub min_samples_leaf: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_estimators: 10,
            bootstrap: true,
            max_features: WINDOW_LEN,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub n_estimators: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestModel {
    /// Arithmetic mean of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn predict_forest(model: &ForestModel, x: &[f64]) -> f64 {
    model.predict(x)
}

/// Trains `n_estimators` trees. Tree `i` draws its bootstrap sample and any
/// feature subsampling from a generator seeded with `seed + i`, so the
/// result does not depend on how the trees are scheduled across threads.
pub fn train_forest(
    x: &[FeatureRow],
    y: &[f64],
    cfg: &ForestConfig,
    seed: u64,
) -> Result<ForestModel> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "forest needs at least 2 rows, got {}",
            x.len()
        )));
    }
    if cfg.n_estimators == 0 {
        return Err(Error::Config("n_estimators must be positive".into()));
    }
    let tree_cfg = TreeConfig {
        max_features: cfg.max_features,
        min_samples_leaf: cfg.min_samples_leaf,
    };
    let trees = (0..cfg.n_estimators)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            if cfg.bootstrap {
                let n = x.len();
                let (bx, by): (Vec<FeatureRow>, Vec<f64>) = (0..n)
                    .map(|_| {
                        let k = rng.random_range(0..n);
                        (x[k], y[k])
                    })
                    .unzip();
                train_tree(&bx, &by, &tree_cfg, &mut rng)
            } else {
                train_tree(x, y, &tree_cfg, &mut rng)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        trees,
        n_estimators: cfg.n_estimators,
        bootstrap: cfg.bootstrap,
        seed,
    })
}

/// One point of the estimator-count curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_estimators: usize,
    pub report: MetricsReport,
}

/// Trains one forest per entry of `n_list` (each restarting the seed
/// schedule at `seed`) and scores it on `test`.
pub fn sweep_estimators(
    train: &[AlignedExample],
    test: &[AlignedExample],
    n_list: &[usize],
    cfg: &ForestConfig,
    seed: u64,
    n_bins: usize,
) -> Result<Vec<SweepPoint>> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::Config(
            "estimator list must be non-empty positive integers".into(),
        ));
    }
    let x: Vec<FeatureRow> = train.iter().map(|e| e.features).collect();
    let y: Vec<f64> = train.iter().map(|e| e.target).collect();
    let y_test: Vec<f64> = test.iter().map(|e| e.target).collect();
    n_list
        .iter()
        .map(|&n| {
            let model = train_forest(
                &x,
                &y,
                &ForestConfig {
                    n_estimators: n,
                    ..*cfg
                },
                seed,
            )?;
            let pred: Vec<f64> = test.iter().map(|e| model.predict(&e.features)).collect();
            Ok(SweepPoint {
                n_estimators: n,
                report: metrics::evaluate(&y_test, &pred, n_bins)?,
            })
        })
        .collect()
}
