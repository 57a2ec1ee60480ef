//! Calibration of low-cost NDIR CO2 sensor readings against a reference
//! instrument.
//!
//! Raw 10 s readings are grouped into one-minute windows of six values, each
//! paired with the reference minute, and three regressors (random forest,
//! single-hidden-layer network, RBF support vector regression) are compared
//! against the uncalibrated sensor on accuracy, MAE, R² and the KL / JS
//! divergence between the predicted and reference value distributions.
//!
//! ```no_run
//! use co2cal::pipeline::{run_experiment, render_table, ExperimentConfig};
//!
//! let result = run_experiment(&ExperimentConfig::default()).unwrap();
//! print!("{}", render_table(&result));
//! ```

pub mod cli;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
pub use ingest::{AlignedExample, FeatureRow, RawSample, ReferenceReading};
pub use metrics::MetricsReport;
pub use models::{CalibratorModel, ModelKind, TrainConfig};
pub use pipeline::{run_experiment, ExperimentConfig, ExperimentResult, Method};
pub use synth::SynthConfig;
