//! End-to-end experiment: load or simulate data, align, split, train every
//! requested calibrator, and score each one next to the raw sensor on the
//! same held-out windows.

use std::fmt::{self, Write as _};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{self, AlignedExample, FeatureRow, SplitStrategy, Timestamp, WINDOW_LEN};
use crate::metrics::{self, MetricsReport, DEFAULT_BINS};
use crate::models::{self, sweep_estimators, CalibratorModel, ModelKind, SweepPoint, TrainConfig};
use crate::synth::{self, SynthConfig};

/// A row of the comparison: the uncalibrated sensor or one of the calibrators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Raw,
    Rfr,
    Ann,
    Svr,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Raw, Method::Rfr, Method::Ann, Method::Svr];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Raw => "raw",
            Method::Rfr => "rfr",
            Method::Ann => "ann",
            Method::Svr => "svr",
        }
    }

    /// Label used in the rendered table.
    pub fn label(&self) -> &'static str {
        match self {
            Method::Raw => "Raw",
            Method::Rfr => "RFR",
            Method::Ann => "ANN",
            Method::Svr => "SVR",
        }
    }

    pub fn model_kind(&self) -> Option<ModelKind> {
        match self {
            Method::Raw => None,
            Method::Rfr => Some(ModelKind::Rfr),
            Method::Ann => Some(ModelKind::Ann),
            Method::Svr => Some(ModelKind::Svr),
        }
    }

    fn train_stage(&self) -> &'static str {
        match self {
            Method::Raw => "raw baseline",
            Method::Rfr => "train rfr",
            Method::Ann => "train ann",
            Method::Svr => "train svr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Method::Raw),
            other => Ok(match other.parse::<ModelKind>()? {
                ModelKind::Rfr => Method::Rfr,
                ModelKind::Ann => Method::Ann,
                ModelKind::Svr => Method::Svr,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files { raw: PathBuf, reference: PathBuf },
    Aligned(PathBuf),
    Synth(SynthConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub split_ratio: f64,
    pub split_seed: u64,
    pub strategy: SplitStrategy,
    pub train: TrainConfig,
    pub n_bins: usize,
    pub methods: Vec<Method>,
    /// Estimator counts for the forest sweep, if one is wanted.
    pub sweep: Option<Vec<usize>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source: DataSource::Synth(SynthConfig::field_day()),
            split_ratio: 0.75,
            split_seed: 42,
            strategy: SplitStrategy::Random,
            train: TrainConfig {
                seed: 42,
                ..TrainConfig::default()
            },
            n_bins: DEFAULT_BINS,
            methods: Method::ALL.to_vec(),
            sweep: None,
        }
    }
}

impl ExperimentConfig {
    /// Uses `seed` for the synthetic data, the split and every model.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let DataSource::Synth(s) = &mut self.source {
            s.seed = seed;
        }
        self.split_seed = seed;
        self.train.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionPoint {
    pub timestamp: Timestamp,
    pub reference_ppm: f64,
    pub predicted_ppm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub report: MetricsReport,
    #[serde(skip)]
    pub predictions: Vec<PredictionPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub synth: Option<u64>,
    pub split: u64,
    pub model: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub n_examples: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub dropped_minutes: usize,
    pub split_ratio: f64,
    pub strategy: SplitStrategy,
    pub n_bins: usize,
    pub seeds: Seeds,
    pub methods: Vec<MethodResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepPoint>>,
    pub warnings: Vec<String>,
}

impl ExperimentResult {
    pub fn method(&self, m: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == m)
    }
}

/// The uncalibrated prediction for one window: the mean of its six readings.
pub fn raw_baseline(example: &AlignedExample) -> f64 {
    example.features.iter().sum::<f64>() / WINDOW_LEN as f64
}

/// Aligned examples plus the number of reference minutes that were dropped.
pub fn load_examples(source: &DataSource) -> Result<(Vec<AlignedExample>, usize)> {
    match source {
        DataSource::Aligned(path) => {
            let file = fs::File::open(path).map_err(|e| Error::from(e).in_stage("ingest"))?;
            let ex = ingest::parse_aligned_csv(file).map_err(|e| e.in_stage("ingest"))?;
            Ok((ex, 0))
        }
        DataSource::Files { raw, reference } => {
            let load = || -> Result<_> {
                let raw = ingest::parse_raw_csv(fs::File::open(raw)?)?;
                let refs = ingest::parse_reference_csv(fs::File::open(reference)?)?;
                Ok((raw, refs))
            };
            let (raw, refs) = load().map_err(|e| e.in_stage("ingest"))?;
            let a = ingest::align(&raw, &refs);
            Ok((a.examples, a.dropped.len()))
        }
        DataSource::Synth(cfg) => {
            let day = synth::generate(cfg).map_err(|e| e.in_stage("simulate"))?;
            let a = ingest::align(&day.raw, &day.reference);
            Ok((a.examples, a.dropped.len()))
        }
    }
}

fn canonical_methods(methods: &[Method]) -> Result<Vec<Method>> {
    let mut m = methods.to_vec();
    m.sort_unstable();
    m.dedup();
    if m.is_empty() {
        return Err(Error::Config("at least one method is required".into()));
    }
    Ok(m)
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Runs every requested method on one shared split.
///
/// Methods train concurrently; each is a pure function of the training set
/// and its seed, so the result is independent of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let methods = canonical_methods(&cfg.methods)?;
    if cfg.n_bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {}", cfg.n_bins)));
    }
    let (examples, dropped_minutes) = load_examples(&cfg.source)?;
    let split = ingest::split(&examples, cfg.split_ratio, cfg.split_seed, cfg.strategy)
        .map_err(|e| e.in_stage("split"))?;

    let x_train: Vec<FeatureRow> = split.train.iter().map(|e| e.features).collect();
    let y_train: Vec<f64> = split.train.iter().map(|e| e.target).collect();
    let x_test: Vec<FeatureRow> = split.test.iter().map(|e| e.features).collect();
    let y_test: Vec<f64> = split.test.iter().map(|e| e.target).collect();

    let fitted: Vec<(Method, Vec<f64>, Option<CalibratorModel>)> = methods
        .par_iter()
        .map(|&m| {
            let Some(kind) = m.model_kind() else {
                return Ok((m, split.test.iter().map(raw_baseline).collect(), None));
            };
            let model = models::train(kind, &x_train, &y_train, &cfg.train)
                .map_err(|e| e.in_stage(m.train_stage()))?;
            Ok((m, model.predict_rows(&x_test), Some(model)))
        })
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let ref_sd = std_dev(&y_test);
    let mut results = Vec::with_capacity(fitted.len());
    for (method, pred, model) in fitted {
        if let Some(CalibratorModel::Svr(svr)) = &model {
            if !svr.converged {
                warnings.push("svr: solver stopped at its iteration budget before reaching tolerance".into());
            }
        }
        let pred_sd = std_dev(&pred);
        if method != Method::Raw && pred_sd < 1e-3 * ref_sd {
            warnings.push(format!(
                "{method}: near-constant predictions (sd {pred_sd:.3e} ppm vs reference sd {ref_sd:.3e} ppm)"
            ));
        }
        let report = metrics::evaluate(&y_test, &pred, cfg.n_bins).map_err(|e| e.in_stage("evaluate"))?;
        let predictions = split
            .test
            .iter()
            .zip(&pred)
            .map(|(e, p)| PredictionPoint {
                timestamp: e.window_start,
                reference_ppm: e.target,
                predicted_ppm: *p,
            })
            .collect();
        results.push(MethodResult {
            method,
            report,
            predictions,
        });
    }

    let sweep = match &cfg.sweep {
        Some(n_list) => Some(
            sweep_estimators(
                &split.train,
                &split.test,
                n_list,
                &cfg.train.forest,
                cfg.train.seed,
                cfg.n_bins,
            )
            .map_err(|e| e.in_stage("sweep"))?,
        ),
        None => None,
    };

    Ok(ExperimentResult {
        n_examples: examples.len(),
        n_train: split.train.len(),
        n_test: split.test.len(),
        dropped_minutes,
        split_ratio: cfg.split_ratio,
        strategy: cfg.strategy,
        n_bins: cfg.n_bins,
        seeds: Seeds {
            synth: match &cfg.source {
                DataSource::Synth(s) => Some(s.seed),
                _ => None,
            },
            split: cfg.split_seed,
            model: cfg.train.seed,
        },
        methods: results,
        sweep,
        warnings,
    })
}

/// Fixed-precision text with negative zero shown as zero.
pub fn fmt_fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_string(),
        _ => s,
    }
}

pub const TABLE_HEADER: [&str; 6] = [
    "Method",
    "Accuracy (%)",
    "MAE (ppm)",
    "R²",
    "KL Divergence",
    "JS Divergence",
];

/// Table cells for one report: accuracy, MAE, R², KL to 2 decimals, JS to 3.
pub fn table_cells(report: &MetricsReport) -> [String; 5] {
    [
        fmt_fixed(report.accuracy_pct, 2),
        fmt_fixed(report.mae_ppm, 2),
        fmt_fixed(report.r2, 2),
        fmt_fixed(report.kl_divergence, 2),
        fmt_fixed(report.js_divergence, 3),
    ]
}

/// Pipe-delimited comparison table, one row per method.
pub fn render_table(result: &ExperimentResult) -> String {
    let rows: Vec<Vec<String>> = result
        .methods
        .iter()
        .map(|m| {
            let mut r = vec![m.method.label().to_string()];
            r.extend(table_cells(&m.report));
            r
        })
        .collect();
    let widths: Vec<usize> = (0..TABLE_HEADER.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain([TABLE_HEADER[c].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        let mut s = String::from("|");
        for (c, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            let pad = w - cell.chars().count();
            if c == 0 {
                let _ = write!(s, " {cell}{} |", " ".repeat(pad));
            } else {
                let _ = write!(s, " {}{cell} |", " ".repeat(pad));
            }
        }
        s.push('\n');
        s
    };
    let header: Vec<String> = TABLE_HEADER.iter().map(|h| h.to_string()).collect();
    let mut out = line(&header);
    out.push('|');
    for w in &widths {
        out.push_str(&"-".repeat(w + 2));
        out.push('|');
    }
    out.push('\n');
    for r in &rows {
        out.push_str(&line(r));
    }
    out
}

/// `report.txt` content: the table, split summary and any warnings.
pub fn render_report(result: &ExperimentResult) -> String {
    let mut out = render_table(result);
    let _ = writeln!(
        out,
        "\n{} aligned windows ({} minutes dropped), {} train / {} test, {} split",
        result.n_examples, result.dropped_minutes, result.n_train, result.n_test, result.strategy
    );
    for w in &result.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

pub fn render_json(result: &ExperimentResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(result).map_err(|e| Error::Io(e.into()))?;
    s.push('\n');
    Ok(s)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub const PREDICTION_HEADER: &str = "timestamp,reference_ppm,predicted_ppm";
pub const SWEEP_HEADER: &str = "n_estimators,accuracy_pct,mae_ppm,r2,kl_divergence,js_divergence";

pub fn predictions_csv(points: &[PredictionPoint]) -> String {
    let mut s = format!("{PREDICTION_HEADER}\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{}",
            ingest::format_timestamp(&p.timestamp),
            p.reference_ppm,
            p.predicted_ppm
        );
    }
    s
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for p in points {
        let r = &p.report;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            p.n_estimators, r.accuracy_pct, r.mae_ppm, r.r2, r.kl_divergence, r.js_divergence
        );
    }
    s
}

/// Writes `pred_<method>.csv` for every method and `sweep.csv` when a sweep ran.
pub fn emit_plot_series(result: &ExperimentResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for m in &result.methods {
        let path = out_dir.join(format!("pred_{}.csv", m.method));
        write_atomic(&path, predictions_csv(&m.predictions).as_bytes())?;
        written.push(path);
    }
    if let Some(sweep) = &result.sweep {
        let path = out_dir.join("sweep.csv");
        write_atomic(&path, sweep_csv(sweep).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `report.txt`, `report.json` and the plot series into `out_dir`.
pub fn write_outputs(result: &ExperimentResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let txt = out_dir.join("report.txt");
    write_atomic(&txt, render_report(result).as_bytes())?;
    let json = out_dir.join("report.json");
    write_atomic(&json, render_json(result)?.as_bytes())?;
    let mut written = vec![txt, json];
    written.extend(emit_plot_series(result, out_dir)?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::DateTime;

    fn example(features: FeatureRow) -> AlignedExample {
        AlignedExample {
            features,
            target: 0.0,
            window_start: DateTime::from_timestamp(0, 0).unwrap(),
        }
    }

    #[test]
    fn raw_baseline_is_window_mean() {
        assert_eq!(raw_baseline(&example([417.0; 6])), 417.0);
        assert_eq!(
            raw_baseline(&example([410.0, 412.0, 414.0, 416.0, 418.0, 420.0])),
            415.0
        );
    }

    #[test]
    fn negative_zero_is_normalised() {
        assert_eq!(fmt_fixed(-0.0001, 2), "0.00");
        assert_eq!(fmt_fixed(-0.0, 3), "0.000");
        assert_eq!(fmt_fixed(-0.01, 2), "-0.01");
        assert_eq!(fmt_fixed(99.9663, 2), "99.97");
    }

    #[test]
    fn perfect_row_renders() {
        let report = MetricsReport {
            accuracy_pct: 100.0,
            mae_ppm: 0.0,
            r2: 1.0,
            kl_divergence: 0.0,
            js_divergence: 0.0,
            n_test: 3,
        };
        assert_eq!(table_cells(&report), ["100.00", "0.00", "1.00", "0.00", "0.000"]);
    }

    #[test]
    fn methods_parse_and_order() {
        assert_eq!("raw".parse::<Method>().unwrap(), Method::Raw);
        assert_eq!("svr".parse::<Method>().unwrap(), Method::Svr);
        assert!("knn".parse::<Method>().is_err());
        let m = canonical_methods(&[Method::Svr, Method::Raw, Method::Svr]).unwrap();
        assert_eq!(m, vec![Method::Raw, Method::Svr]);
        assert!(canonical_methods(&[]).is_err());
    }
}
