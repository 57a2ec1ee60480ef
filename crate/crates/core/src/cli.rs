//! Command-line front end.
//!
//! Every subcommand accepts `--config <file>`, an INI-style `key = value`
//! file whose keys are the long flag names (`-` or `_` both accepted,
//! section headers ignored). Flags given on the command line override file
//! values; keys the subcommand does not understand are rejected.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 I/O error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::ingest::{self, FeatureRow, SplitStrategy};
use crate::metrics::{self, DEFAULT_BINS};
use crate::models::{self, persist, ModelKind, TrainConfig};
use crate::pipeline::{self, DataSource, ExperimentConfig, Method, MethodResult, PredictionPoint};
use crate::synth::{self, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_IO: i32 = 3;

const DEFAULT_SEED: u64 = 42;
const DEFAULT_OUT: &str = "out";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Run(e) if e.is_io() => EXIT_IO,
            CliError::Run(_) => EXIT_DATA,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "co2cal",
    version,
    about = "Calibrate low-cost CO2 sensor readings against a reference instrument"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic raw/reference CSV pair.
    Simulate(SimulateArgs),
    /// Align raw and reference CSVs into six-reading windows.
    Align(AlignArgs),
    /// Split an aligned CSV into train and test CSVs.
    Split(SplitArgs),
    /// Train one calibrator on the training split of an aligned CSV.
    Train(TrainArgs),
    /// Score a saved model and the raw baseline on an aligned CSV.
    Evaluate(EvaluateArgs),
    /// Evaluate random forests over a range of estimator counts.
    Sweep(SweepArgs),
    /// Run the full comparison of raw, RFR, ANN and SVR.
    Run(RunArgs),
    /// Print the version.
    Version,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// INI-style file of `flag = value` defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory; nothing is written outside it [default: out].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for data generation, splitting and training [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Simulated duration in hours [default: 24].
    #[arg(long)]
    pub hours: Option<f64>,
    /// True-signal baseline in ppm [default: 415].
    #[arg(long)]
    pub baseline: Option<f64>,
    /// Diurnal amplitude in ppm [default: 4].
    #[arg(long)]
    pub diurnal: Option<f64>,
    /// Peak amplitude of the slow seeded wander in ppm [default: 1.5].
    #[arg(long)]
    pub wander: Option<f64>,
    /// Additive sensor bias in ppm [default: 21.5].
    #[arg(long)]
    pub bias: Option<f64>,
    /// Sensor gain error as a fraction [default: 0].
    #[arg(long)]
    pub gain: Option<f64>,
    /// Standard deviation of sensor noise in ppm [default: 2].
    #[arg(long)]
    pub noise: Option<f64>,
    /// Sensor drift in ppm per day [default: 0].
    #[arg(long)]
    pub drift: Option<f64>,
    /// Keep every sample instead of the default day's dropout pattern.
    #[arg(long)]
    pub no_dropout: bool,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Use simulated data (the default when no files are given).
    #[arg(long)]
    pub synth: bool,
    /// Raw sensor CSV (with --reference).
    #[arg(long, value_name = "FILE")]
    pub raw: Option<PathBuf>,
    /// Reference instrument CSV (with --raw).
    #[arg(long, value_name = "FILE")]
    pub reference: Option<PathBuf>,
    /// Pre-aligned window CSV.
    #[arg(long, value_name = "FILE")]
    pub aligned: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitOpts {
    /// Fraction of windows used for training [default: 0.75].
    #[arg(long)]
    pub ratio: Option<f64>,
    /// `random` or `chronological` [default: random].
    #[arg(long)]
    pub strategy: Option<String>,
}

#[derive(Debug, Args)]
pub struct ModelOpts {
    /// Hidden units of the network [default: 150].
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Network training epochs [default: 300].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Network learning rate [default: 0.001].
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Network mini-batch size [default: 32].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Forest: disable bootstrap resampling.
    #[arg(long)]
    pub no_bootstrap: bool,
    /// Forest: features considered per split [default: 6].
    #[arg(long)]
    pub max_features: Option<usize>,
    /// Forest: minimum rows per leaf [default: 1].
    #[arg(long)]
    pub min_samples_leaf: Option<usize>,
    /// SVR box constraint C [default: 1].
    #[arg(long)]
    pub svr_c: Option<f64>,
    /// SVR insensitivity width in standardised units [default: 0.1].
    #[arg(long)]
    pub svr_epsilon: Option<f64>,
    /// SVR RBF width [default: 1 / (6 * mean feature variance)].
    #[arg(long)]
    pub svr_gamma: Option<f64>,
    /// SVR KKT tolerance [default: 0.001].
    #[arg(long)]
    pub svr_tolerance: Option<f64>,
    /// SVR iteration budget in passes [default: 100].
    #[arg(long)]
    pub svr_max_passes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub synth: SynthArgs,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Raw sensor CSV.
    #[arg(long, value_name = "FILE")]
    pub raw: Option<PathBuf>,
    /// Reference instrument CSV.
    #[arg(long, value_name = "FILE")]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Aligned window CSV.
    #[arg(long, value_name = "FILE")]
    pub aligned: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitOpts,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Aligned window CSV.
    #[arg(long, value_name = "FILE")]
    pub aligned: Option<PathBuf>,
    /// `rfr`, `ann` or `svr` [default: rfr].
    #[arg(long)]
    pub model: Option<String>,
    /// Forest size [default: 10].
    #[arg(long)]
    pub estimators: Option<usize>,
    #[command(flatten)]
    pub split: SplitOpts,
    #[command(flatten)]
    pub model_opts: ModelOpts,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Model file written by `train`.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Aligned window CSV to score.
    #[arg(long, value_name = "FILE")]
    pub aligned: Option<PathBuf>,
    /// Shared histogram bins for KL/JS [default: 50].
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub synth: SynthArgs,
    #[command(flatten)]
    pub split: SplitOpts,
    /// Estimator counts: `a:b` (inclusive), `a,b,c` or `n` [default: 1:50].
    #[arg(long)]
    pub estimators: Option<String>,
    /// Shared histogram bins for KL/JS [default: 50].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Forest: disable bootstrap resampling.
    #[arg(long)]
    pub no_bootstrap: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub synth: SynthArgs,
    #[command(flatten)]
    pub split: SplitOpts,
    /// Comma-separated methods from raw,rfr,ann,svr [default: all].
    #[arg(long)]
    pub methods: Option<String>,
    /// Forest size [default: 10].
    #[arg(long)]
    pub estimators: Option<usize>,
    /// Also sweep forest sizes, e.g. `1:50`.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Shared histogram bins for KL/JS [default: 50].
    #[arg(long)]
    pub bins: Option<usize>,
    #[command(flatten)]
    pub model_opts: ModelOpts,
}

/// Values read from a `--config` file, consumed key by key.
struct FileSettings {
    values: BTreeMap<String, String>,
    source: String,
}

impl FileSettings {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(FileSettings {
                values: BTreeMap::new(),
                source: String::new(),
            });
        };
        let text = fs::read_to_string(path)?;
        let ini = ini::Ini::load_from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (_, props) in ini.iter() {
            for (k, v) in props.iter() {
                values.insert(k.trim().replace('_', "-"), v.trim().to_string());
            }
        }
        Ok(FileSettings {
            values,
            source: path.display().to_string(),
        })
    }

    fn take<T: FromStr>(&mut self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.values.remove(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|e| {
                CliError::Usage(format!("{}: bad value `{raw}` for `{key}`: {e}", self.source))
            }),
        }
    }

    /// Flag value if given, else the file value.
    fn pick<T: FromStr>(&mut self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T::Err: fmt::Display,
    {
        let from_file = self.take(key)?;
        Ok(flag.or(from_file))
    }

    fn pick_flag(&mut self, flag: bool, key: &str) -> CliResult<bool> {
        Ok(flag || self.take::<bool>(key)?.unwrap_or(false))
    }

    fn finish(self) -> CliResult<()> {
        match self.values.keys().next() {
            None => Ok(()),
            Some(k) => Err(CliError::Usage(format!(
                "{}: unknown config key `{k}`",
                self.source
            ))),
        }
    }
}

fn parse_value<T: FromStr>(raw: &str, what: &str) -> CliResult<T>
where
    T::Err: fmt::Display,
{
    raw.parse()
        .map_err(|e| CliError::Usage(format!("bad {what} `{raw}`: {e}")))
}

/// Expands `a:b` (inclusive), `a,b,c` or a single count.
pub fn parse_estimator_list(text: &str) -> Result<Vec<usize>, String> {
    let text = text.trim();
    let list: Vec<usize> = if let Some((a, b)) = text.split_once(':') {
        let a: usize = a.trim().parse().map_err(|_| format!("bad range start in `{text}`"))?;
        let b: usize = b.trim().parse().map_err(|_| format!("bad range end in `{text}`"))?;
        if a > b {
            return Err(format!("empty range `{text}`"));
        }
        (a..=b).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| format!("bad count `{s}`")))
            .collect::<Result<_, _>>()?
    };
    if list.is_empty() || list.contains(&0) {
        return Err(format!("estimator counts must be positive: `{text}`"));
    }
    Ok(list)
}

struct Common {
    out: PathBuf,
    seed: u64,
}

fn common(args: &CommonArgs, file: &mut FileSettings) -> CliResult<Common> {
    let out = file
        .pick(args.out.clone(), "out")?
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let seed = file.pick(args.seed, "seed")?.unwrap_or(DEFAULT_SEED);
    Ok(Common { out, seed })
}

fn synth_config(a: &SynthArgs, file: &mut FileSettings, seed: u64) -> CliResult<SynthConfig> {
    let mut c = if file.pick_flag(a.no_dropout, "no-dropout")? {
        SynthConfig::default()
    } else {
        SynthConfig::field_day()
    };
    let fields: [(Option<f64>, &str, &mut f64); 8] = [
        (a.hours, "hours", &mut c.duration_hours),
        (a.baseline, "baseline", &mut c.baseline_ppm),
        (a.diurnal, "diurnal", &mut c.diurnal_amplitude_ppm),
        (a.wander, "wander", &mut c.wander_ppm),
        (a.bias, "bias", &mut c.bias_ppm),
        (a.gain, "gain", &mut c.gain_error_fraction),
        (a.noise, "noise", &mut c.noise_sd_ppm),
        (a.drift, "drift", &mut c.drift_ppm_per_day),
    ];
    for (flag, key, slot) in fields {
        if let Some(v) = file.pick(flag, key)? {
            *slot = v;
        }
    }
    c.seed = seed;
    Ok(c)
}

fn data_source(
    src: &SourceArgs,
    synth: &SynthArgs,
    file: &mut FileSettings,
    seed: u64,
) -> CliResult<DataSource> {
    let use_synth = file.pick_flag(src.synth, "synth")?;
    let raw = file.pick(src.raw.clone(), "raw")?;
    let reference = file.pick(src.reference.clone(), "reference")?;
    let aligned = file.pick(src.aligned.clone(), "aligned")?;
    let synth_cfg = synth_config(synth, file, seed)?;
    let files_given = raw.is_some() || reference.is_some() || aligned.is_some();
    if use_synth && files_given {
        return Err(CliError::Usage("--synth cannot be combined with input files".into()));
    }
    match (raw, reference, aligned) {
        (None, None, None) => Ok(DataSource::Synth(synth_cfg)),
        (None, None, Some(a)) => Ok(DataSource::Aligned(a)),
        (Some(raw), Some(reference), None) => Ok(DataSource::Files { raw, reference }),
        _ => Err(CliError::Usage(
            "give either --raw with --reference, or --aligned, or --synth".into(),
        )),
    }
}

fn split_opts(a: &SplitOpts, file: &mut FileSettings) -> CliResult<(f64, SplitStrategy)> {
    let ratio = file.pick(a.ratio, "ratio")?.unwrap_or(0.75);
    let strategy = match file.pick(a.strategy.clone(), "strategy")? {
        Some(s) => parse_value(&s, "strategy")?,
        None => SplitStrategy::Random,
    };
    Ok((ratio, strategy))
}

fn train_config(
    opts: &ModelOpts,
    estimators: Option<usize>,
    file: &mut FileSettings,
    seed: u64,
) -> CliResult<TrainConfig> {
    let mut cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    if let Some(n) = file.pick(estimators, "estimators")? {
        cfg.forest.n_estimators = n;
    }
    if file.pick_flag(opts.no_bootstrap, "no-bootstrap")? {
        cfg.forest.bootstrap = false;
    }
    if let Some(v) = file.pick(opts.max_features, "max-features")? {
        cfg.forest.max_features = v;
    }
    if let Some(v) = file.pick(opts.min_samples_leaf, "min-samples-leaf")? {
        cfg.forest.min_samples_leaf = v;
    }
    if let Some(v) = file.pick(opts.hidden, "hidden")? {
        cfg.mlp.hidden_units = v;
    }
    if let Some(v) = file.pick(opts.epochs, "epochs")? {
        cfg.mlp.epochs = v;
    }
    if let Some(v) = file.pick(opts.learning_rate, "learning-rate")? {
        cfg.mlp.learning_rate = v;
    }
    if let Some(v) = file.pick(opts.batch_size, "batch-size")? {
        cfg.mlp.batch_size = v;
    }
    if let Some(v) = file.pick(opts.svr_c, "svr-c")? {
        cfg.svr.c = v;
    }
    if let Some(v) = file.pick(opts.svr_epsilon, "svr-epsilon")? {
        cfg.svr.epsilon = v;
    }
    if let Some(v) = file.pick(opts.svr_gamma, "svr-gamma")? {
        cfg.svr.gamma = Some(v);
    }
    if let Some(v) = file.pick(opts.svr_tolerance, "svr-tolerance")? {
        cfg.svr.tolerance = v;
    }
    if let Some(v) = file.pick(opts.svr_max_passes, "svr-max-passes")? {
        cfg.svr.max_passes = v;
    }
    Ok(cfg)
}

fn require(path: Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    path.ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

fn read_aligned(path: &Path) -> CliResult<Vec<ingest::AlignedExample>> {
    Ok(ingest::parse_aligned_csv(fs::File::open(path)?)?)
}

fn write_csv_file<F>(path: &Path, write: F) -> CliResult<()>
where
    F: FnOnce(&mut Vec<u8>) -> crate::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    pipeline::write_atomic(path, &buf)?;
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    let mut file = FileSettings::load(a.common.config.as_deref())?;
    let c = common(&a.common, &mut file)?;
    let cfg = synth_config(&a.synth, &mut file, c.seed)?;
    file.finish()?;
    println!("seed: {}", c.seed);
    let day = synth::generate(&cfg)?;
    fs::create_dir_all(&c.out)?;
    write_csv_file(&c.out.join("raw.csv"), |b| ingest::write_raw_csv(b, &day.raw))?;
    write_csv_file(&c.out.join("reference.csv"), |b| {
        ingest::write_reference_csv(b, &day.reference)
    })?;
    println!(
        "wrote {} raw samples and {} reference minutes to {}",
        day.raw.len(),
        day.reference.len(),
        c.out.display()
    );
    Ok(())
}

fn cmd_align(a: AlignArgs) -> CliResult<()> {
    let mut file = FileSettings::load(a.common.config.as_deref())?;
    let c = common(&a.common, &mut file)?;
    let raw = require(file.pick(a.raw, "raw")?, "raw")?;
    let reference = require(file.pick(a.reference, "reference")?, "reference")?;
    file.finish()?;
    let raw = ingest::parse_raw_csv(fs::File::open(raw)?)?;
    let refs = ingest::parse_reference_csv(fs::File::open(reference)?)?;
    let alignment = ingest::align(&raw, &refs);
    fs::create_dir_all(&c.out)?;
    write_csv_file(&c.out.join("aligned.csv"), |b| {
        ingest::write_aligned_csv(b, &alignment.examples)
    })?;
    println!(
        "{} windows aligned from {} raw samples and {} reference minutes; {} minutes dropped",
        alignment.examples.len(),
        raw.len(),
        refs.len(),
        alignment.dropped.len()
    );
    Ok(())
}

fn cmd_split(a: SplitArgs) -> CliResult<()> {
    let mut file = FileSettings::load(a.common.config.as_deref())?;
    let c = common(&a.common, &mut file)?;
    let aligned = require(file.pick(a.aligned, "aligned")?, "aligned")?;
    let (ratio, strategy) = split_opts(&a.split, &mut file)?;
    file.finish()?;
    println!("seed: {}", c.seed);
    let examples = read_aligned(&aligned)?;
    let s = ingest::split(&examples, ratio, c.seed, strategy)?;
    fs::create_dir_all(&c.out)?;
    write_csv_file(&c.out.join("train.csv"), |b| ingest::write_aligned_csv(b, &s.train))?;
    write_csv_file(&c.out.join("test.csv"), |b| ingest::write_aligned_csv(b, &s.test))?;
    println!("{} train / {} test ({strategy})", s.train.len(), s.test.len());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> CliResult<()> {
    let mut file = FileSettings::load(a.common.config.as_deref())?;
    let c = common(&a.common, &mut file)?;
    let aligned = require(file.pick(a.aligned, "aligned")?, "aligned")?;
    let kind: ModelKind = match file.pick(a.model, "model")? {
        Some(m) => parse_value(&m, "model")?,
        None => ModelKind::Rfr,
    };
    let (ratio, strategy) = split_opts(&a.split, &mut file)?;
    let cfg = train_config(&a.model_opts, a.estimators, &mut file, c.seed)?;
    file.finish()?;
    println!("seed: {} (split and model)", c.seed);

    let examples = read_aligned(&aligned)?;
    let s = ingest::split(&examples, ratio, c.seed, strategy)?;
    let rows = |v: &[ingest::AlignedExample]| -> (Vec<FeatureRow>, Vec<f64>) {
        v.iter().map(|e| (e.features, e.target)).unzip()
    };
    let (x_train, y_train) = rows(&s.train);
    let (x_test, y_test) = rows(&s.test);
    let model = models::train(kind, &x_train, &y_train, &cfg)?;
    let train_mae = metrics::mae(&y_train, &model.predict_rows(&x_train))?;
    let test_mae = metrics::mae(&y_test, &model.predict_rows(&x_test))?;

    fs::create_dir_all(&c.out)?;
    let path = c.out.join(format!("model_{kind}.bin"));
    persist::write_model_file(&path, &model)?;
    println!("model: {kind} -> {}", path.display());
    println!("train MAE: {train_mae:.4} ppm ({} windows)", y_train.len());
    println!("test MAE:  {test_mae:.4} ppm ({} windows)", y_test.len());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> CliResult<()> {
    let mut file = FileSettings::load(a.common.config.as_deref())?;
    let c = common(&a.common, &mut file)?;
    let model_path = require(file.pick(a.model, "model")?, "model")?;
    let aligned = require(file.pick(a.aligned, "aligned")?, "aligned")?;
    let bins = file.pick(a.bins, "bins")?.unwrap_or(DEFAULT_BINS);
    file.finish()?;

    let model = persist::read_model_file(&model_path)?;
    let examples = read_aligned(&aligned)?;
    let y: Vec<f64> = examples.iter().map(|e| e.target).collect();
    let method: Method = model.kind().as_str().parse()?;
    let mut results = Vec::new();
    for (m, pred) in [
        (Method::Raw, examples.iter().map(pipeline::raw_baseline).collect::<Vec<_>>()),
        (method, examples.iter().map(|e| model.predict(&e.features)).collect()),
    ] {
        let report = metrics::evaluate(&y, &pred, bins)?;
        let predictions = examples
            .iter()
            .zip(&pred)
            .map(|(e, p)| PredictionPoint {
                timestamp: e.window_start,
                reference_ppm: e.target,
                predicted_ppm: *p,
            })
            .collect();
        results.push(MethodResult {
            method: m,
            report,
            predictions,
        });
    }

    fs::create_dir_all(&c.out)?;
    let json = serde_json::to_string_pretty(&results).map_err(|e| Error::Io(e.into()))? + "\n";
    pipeline::write_atomic(&c.out.join("evaluation.json"), json.as_bytes())?;
    let pred_path = c.out.join(format!("pred_{method}.csv"));
    pipeline::write_atomic(&pred_path, pipeline::predictions_csv(&results[1].predictions).as_bytes())?;
    for r in &results {
        let [acc, mae, r2, kl, js] = pipeline::table_cells(&r.report);
        println!(
            "{:<4} accuracy {acc}%  MAE {mae} ppm  R² {r2}  KL {kl}  JS {js}",
            r.method.label()
        );
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> CliResult<()> {
    let mut file = FileSettings::load(a.common.config.as_deref())?;
    let c = common(&a.common, &mut file)?;
    let source = data_source(&a.source, &a.synth, &mut file, c.seed)?;
    let (ratio, strategy) = split_opts(&a.split, &mut file)?;
    let text = file.pick(a.estimators, "estimators")?.unwrap_or_else(|| "1:50".into());
    let n_list = parse_estimator_list(&text).map_err(CliError::Usage)?;
    let bins = file.pick(a.bins, "bins")?.unwrap_or(DEFAULT_BINS);
    let no_bootstrap = file.pick_flag(a.no_bootstrap, "no-bootstrap")?;
    file.finish()?;
    print_seeds(&source, c.seed);

    let (examples, _) = pipeline::load_examples(&source)?;
    let s = ingest::split(&examples, ratio, c.seed, strategy).map_err(|e| e.in_stage("split"))?;
    let forest = models::ForestConfig {
        bootstrap: !no_bootstrap,
        ..models::ForestConfig::default()
    };
    let points = models::sweep_estimators(&s.train, &s.test, &n_list, &forest, c.seed, bins)
        .map_err(|e| e.in_stage("sweep"))?;
    fs::create_dir_all(&c.out)?;
    let path = c.out.join("sweep.csv");
    pipeline::write_atomic(&path, pipeline::sweep_csv(&points).as_bytes())?;
    println!("{} forest sizes evaluated -> {}", points.len(), path.display());
    Ok(())
}

fn print_seeds(source: &DataSource, seed: u64) {
    match source {
        DataSource::Synth(_) => println!("seed: {seed} (synthetic data, split and models)"),
        _ => println!("seed: {seed} (split and models)"),
    }
}

fn cmd_run(a: RunArgs) -> CliResult<()> {
    let mut file = FileSettings::load(a.common.config.as_deref())?;
    let c = common(&a.common, &mut file)?;
    let source = data_source(&a.source, &a.synth, &mut file, c.seed)?;
    let (split_ratio, strategy) = split_opts(&a.split, &mut file)?;
    let methods = match file.pick(a.methods, "methods")? {
        Some(list) => list
            .split(',')
            .map(|m| parse_value::<Method>(m.trim(), "method"))
            .collect::<CliResult<Vec<_>>>()?,
        None => Method::ALL.to_vec(),
    };
    let sweep = match file.pick(a.sweep, "sweep")? {
        Some(text) => Some(parse_estimator_list(&text).map_err(CliError::Usage)?),
        None => None,
    };
    let n_bins = file.pick(a.bins, "bins")?.unwrap_or(DEFAULT_BINS);
    let train = train_config(&a.model_opts, a.estimators, &mut file, c.seed)?;
    file.finish()?;
    print_seeds(&source, c.seed);

    let cfg = ExperimentConfig {
        source,
        split_ratio,
        split_seed: c.seed,
        strategy,
        train,
        n_bins,
        methods,
        sweep,
    };
    let result = pipeline::run_experiment(&cfg)?;
    pipeline::write_outputs(&result, &c.out)?;
    print!("{}", pipeline::render_report(&result));
    println!("outputs written to {}", c.out.display());
    Ok(())
}

pub fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Align(a) => cmd_align(a),
        Command::Split(a) => cmd_split(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Run(a) => cmd_run(a),
        Command::Version => {
            println!("co2cal {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
