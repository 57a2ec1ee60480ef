//! The three calibrators and their common plumbing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FeatureRow;

pub mod forest;
pub mod mlp;
pub mod persist;
pub mod svr;
pub mod tree;

pub use forest::{predict_forest, sweep_estimators, train_forest, ForestConfig, ForestModel, SweepPoint};
pub use mlp::{predict_mlp, train_mlp, MlpConfig, MlpModel, Network};
pub use persist::{load_model, save_model};
pub use svr::{predict_svr, solve_dual, train_svr, DualSolution, Gram, SvrConfig, SvrModel};
pub use tree::{predict_tree, train_tree, TreeConfig, TreeNode};

/// Z-score transform `(v - mean) / sd`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub sd: f64,
}

impl Standardizer {
    /// Fits mean and population standard deviation; `None` when the values
    /// are empty, non-finite or have zero spread.
    pub fn fit(values: &[f64]) -> Option<Standardizer> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        (sd > 0.0 && sd.is_finite()).then_some(Standardizer { mean, sd })
    }

    /// Like [`Standardizer::fit`] but falls back to unit scale for constant columns.
    pub fn fit_or_unit(values: &[f64]) -> Standardizer {
        Self::fit(values).unwrap_or_else(|| Standardizer {
            mean: values.first().copied().unwrap_or(0.0),
            sd: 1.0,
        })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.sd
    }

    pub fn invert(&self, z: f64) -> f64 {
        self.mean + self.sd * z
    }
}

pub(crate) fn fit_columns(x: &[FeatureRow]) -> Vec<Standardizer> {
    (0..crate::ingest::WINDOW_LEN)
        .map(|f| Standardizer::fit_or_unit(&x.iter().map(|r| r[f]).collect::<Vec<_>>()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Random forest regression.
    Rfr,
    /// 6-150-1 tanh network.
    Ann,
    /// RBF-kernel support vector regression.
    Svr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Rfr, ModelKind::Ann, ModelKind::Svr];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Rfr => "rfr",
            ModelKind::Ann => "ann",
            ModelKind::Svr => "svr",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rfr" | "forest" => Ok(ModelKind::Rfr),
            "ann" | "mlp" => Ok(ModelKind::Ann),
            "svr" => Ok(ModelKind::Svr),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub forest: ForestConfig,
    pub mlp: MlpConfig,
    pub svr: SvrConfig,
}

/// A trained calibrator of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum CalibratorModel {
    Forest(ForestModel),
    Mlp(MlpModel),
    Svr(SvrModel),
}

impl CalibratorModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            CalibratorModel::Forest(_) => ModelKind::Rfr,
            CalibratorModel::Mlp(_) => ModelKind::Ann,
            CalibratorModel::Svr(_) => ModelKind::Svr,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            CalibratorModel::Forest(m) => m.predict(x),
            CalibratorModel::Mlp(m) => m.predict(x),
            CalibratorModel::Svr(m) => m.predict(x),
        }
    }

    pub fn predict_rows(&self, rows: &[FeatureRow]) -> Vec<f64> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

pub fn train(kind: ModelKind, x: &[FeatureRow], y: &[f64], cfg: &TrainConfig) -> Result<CalibratorModel> {
    Ok(match kind {
        ModelKind::Rfr => CalibratorModel::Forest(train_forest(x, y, &cfg.forest, cfg.seed)?),
        ModelKind::Ann => CalibratorModel::Mlp(train_mlp(x, y, &cfg.mlp, cfg.seed)?),
        ModelKind::Svr => CalibratorModel::Svr(train_svr(x, y, &cfg.svr, cfg.seed)?),
    })
}
