//! CSV ingestion, 6-to-1 window alignment and train/test splitting.
//!
//! The low-cost sensor reports an integer ppm value every 10 s, while the
//! reference instrument publishes one averaged value per minute. Each
//! reference minute `[t, t + 60 s)` that contains exactly six raw samples
//! becomes one [`AlignedExample`]; every other minute is dropped and
//! reported in [`Alignment::dropped`].

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, DurationRound, SecondsFormat, TimeDelta, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of raw readings that make up one aligned example.
pub const WINDOW_LEN: usize = 6;

/// Width of an alignment window in seconds.
pub const WINDOW_SECONDS: i64 = 60;

pub type Timestamp = DateTime<Utc>;

/// The six chronological raw readings of one window.
pub type FeatureRow = [f64; WINDOW_LEN];

pub const RAW_HEADER: &str = "timestamp,node_id,co2_ppm,sensor_temp_c";
pub const REFERENCE_HEADER: &str = "timestamp,co2_ppm";
pub const ALIGNED_HEADER: &str = "window_start,x1,x2,x3,x4,x5,x6,target_ppm";

/// One reading from the low-cost sensor node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub timestamp: Timestamp,
    pub node_id: String,
    pub co2_ppm: u32,
    /// Carried through ingestion but never used as a model feature.
    pub sensor_temp_c: Option<f64>,
}

/// One minute-averaged reading from the reference instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceReading {
    pub timestamp: Timestamp,
    pub co2_ppm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedExample {
    pub features: FeatureRow,
    pub target: f64,
    pub window_start: Timestamp,
}

/// Output of [`align`]: the complete windows plus the minutes that were skipped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Alignment {
    pub examples: Vec<AlignedExample>,
    pub dropped: Vec<DroppedMinute>,
}

/// A reference minute that did not contain exactly [`WINDOW_LEN`] raw samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedMinute {
    pub minute: Timestamp,
    pub raw_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitStrategy {
    #[default]
    Random,
    Chronological,
}

impl fmt::Display for SplitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitStrategy::Random => "random",
            SplitStrategy::Chronological => "chronological",
        })
    }
}

impl FromStr for SplitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SplitStrategy::Random),
            "chronological" => Ok(SplitStrategy::Chronological),
            other => Err(Error::Config(format!("unknown split strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<AlignedExample>,
    pub test: Vec<AlignedExample>,
    pub seed: u64,
    pub strategy: SplitStrategy,
}

impl AlignedExample {
    /// End of the half-open window.
    pub fn window_end(&self) -> Timestamp {
        self.window_start + TimeDelta::seconds(WINDOW_SECONDS)
    }
}

pub fn format_timestamp(ts: &Timestamp) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_utc(field: &str) -> Option<Timestamp> {
    let parsed = DateTime::parse_from_rfc3339(field).ok()?;
    if parsed.offset().local_minus_utc() != 0 {
        return None;
    }
    Some(parsed.with_timezone(&Utc))
}

fn minute_floor(ts: Timestamp) -> Timestamp {
    ts.duration_trunc(TimeDelta::seconds(WINDOW_SECONDS))
        .expect("minute truncation is in range for any parsed timestamp")
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn check_header<R: Read>(reader: &mut csv::Reader<R>, expected: &str) -> Result<()> {
    let found = match reader.headers() {
        Ok(h) => h.iter().collect::<Vec<_>>().join(","),
        Err(e) => return Err(csv_error(e)),
    };
    if found != expected {
        return Err(Error::Header {
            expected: expected.to_string(),
            found,
        });
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::parse(
            row,
            format!("expected {expected_len} fields, found {len}"),
        ),
        csv::ErrorKind::Utf8 { .. } => Error::parse(row, "invalid UTF-8"),
        other => Error::parse(row, format!("{other:?}")),
    }
}

fn records<R: Read>(
    reader: &mut csv::Reader<R>,
) -> impl Iterator<Item = Result<(usize, csv::StringRecord)>> + '_ {
    reader.records().map(|r| {
        let rec = r.map_err(csv_error)?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        Ok((row, rec))
    })
}

/// Parses a raw-sensor CSV with header `timestamp,node_id,co2_ppm,sensor_temp_c`.
///
/// Timestamps must be whole-second RFC 3339 UTC instants, strictly increasing
/// per node. An empty `sensor_temp_c` cell is read as `None`.
pub fn parse_raw_csv<R: Read>(input: R) -> Result<Vec<RawSample>> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, RAW_HEADER)?;
    let mut out = Vec::new();
    let mut last_seen: HashMap<String, Timestamp> = HashMap::new();
    for item in records(&mut reader) {
        let (row, rec) = item?;
        let timestamp = parse_utc(&rec[0])
            .filter(|t| t.timestamp_subsec_nanos() == 0)
            .ok_or_else(|| Error::parse(row, "malformed timestamp"))?;
        let node_id = rec[1].to_string();
        if node_id.is_empty() {
            return Err(Error::parse(row, "empty node id"));
        }
        let co2_ppm = match rec[2].parse::<i64>() {
            Ok(v) if v < 0 => return Err(Error::parse(row, "negative ppm")),
            Ok(v) => u32::try_from(v).map_err(|_| Error::parse(row, "ppm out of range"))?,
            Err(_) => return Err(Error::parse(row, "non-integer ppm")),
        };
        let sensor_temp_c = match &rec[3] {
            "" => None,
            s => Some(
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(row, "malformed temperature"))?,
            ),
        };
        if let Some(prev) = last_seen.get(&node_id) {
            if timestamp <= *prev {
                return Err(Error::parse(row, "out-of-order timestamp"));
            }
        }
        last_seen.insert(node_id.clone(), timestamp);
        out.push(RawSample {
            timestamp,
            node_id,
            co2_ppm,
            sensor_temp_c,
        });
    }
    Ok(out)
}

/// Parses a reference CSV with header `timestamp,co2_ppm`; timestamps are
/// truncated to the whole minute.
pub fn parse_reference_csv<R: Read>(input: R) -> Result<Vec<ReferenceReading>> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, REFERENCE_HEADER)?;
    let mut out: Vec<ReferenceReading> = Vec::new();
    for item in records(&mut reader) {
        let (row, rec) = item?;
        let timestamp = parse_utc(&rec[0])
            .map(minute_floor)
            .ok_or_else(|| Error::parse(row, "malformed timestamp"))?;
        let co2_ppm = rec[1]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::parse(row, "malformed ppm"))?;
        if co2_ppm <= 0.0 {
            return Err(Error::parse(row, "non-positive ppm"));
        }
        if let Some(prev) = out.last() {
            if timestamp == prev.timestamp {
                return Err(Error::parse(row, "duplicate reference minute"));
            }
            if timestamp < prev.timestamp {
                return Err(Error::parse(row, "out-of-order timestamp"));
            }
        }
        out.push(ReferenceReading { timestamp, co2_ppm });
    }
    Ok(out)
}

/// Parses the aligned-example CSV written by [`write_aligned_csv`].
pub fn parse_aligned_csv<R: Read>(input: R) -> Result<Vec<AlignedExample>> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, ALIGNED_HEADER)?;
    let mut out = Vec::new();
    for item in records(&mut reader) {
        let (row, rec) = item?;
        let window_start = parse_utc(&rec[0])
            .filter(|t| *t == minute_floor(*t))
            .ok_or_else(|| Error::parse(row, "malformed window start"))?;
        let mut values = [0.0; WINDOW_LEN + 1];
        for (slot, field) in values.iter_mut().zip(rec.iter().skip(1)) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(row, "malformed value"))?;
        }
        let mut features = [0.0; WINDOW_LEN];
        features.copy_from_slice(&values[..WINDOW_LEN]);
        out.push(AlignedExample {
            features,
            target: values[WINDOW_LEN],
            window_start,
        });
    }
    Ok(out)
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::Io(e.into_error()))?
        .flush()?;
    Ok(())
}

fn write_header<W: Write>(w: &mut csv::Writer<W>, header: &str) -> Result<()> {
    w.write_record(header.split(',')).map_err(csv_error)
}

pub fn write_raw_csv<W: Write>(out: W, samples: &[RawSample]) -> Result<()> {
    let mut w = csv_writer(out);
    write_header(&mut w, RAW_HEADER)?;
    for s in samples {
        let temp = s.sensor_temp_c.map(|t| t.to_string()).unwrap_or_default();
        w.write_record([
            format_timestamp(&s.timestamp),
            s.node_id.clone(),
            s.co2_ppm.to_string(),
            temp,
        ])
        .map_err(csv_error)?;
    }
    finish(w)
}

pub fn write_reference_csv<W: Write>(out: W, refs: &[ReferenceReading]) -> Result<()> {
    let mut w = csv_writer(out);
    write_header(&mut w, REFERENCE_HEADER)?;
    for r in refs {
        w.write_record([format_timestamp(&r.timestamp), r.co2_ppm.to_string()])
            .map_err(csv_error)?;
    }
    finish(w)
}

pub fn write_aligned_csv<W: Write>(out: W, examples: &[AlignedExample]) -> Result<()> {
    let mut w = csv_writer(out);
    write_header(&mut w, ALIGNED_HEADER)?;
    for ex in examples {
        let mut rec = Vec::with_capacity(WINDOW_LEN + 2);
        rec.push(format_timestamp(&ex.window_start));
        rec.extend(ex.features.iter().map(f64::to_string));
        rec.push(ex.target.to_string());
        w.write_record(&rec).map_err(csv_error)?;
    }
    finish(w)
}

/// Pairs each reference minute with the raw samples that fall inside it.
///
/// Membership is half-open, `[minute, minute + 60 s)`. A minute yields an
/// example only when it holds exactly [`WINDOW_LEN`] samples; features keep
/// chronological order. Samples from every node in `raw` are pooled, so
/// callers holding several nodes should filter to one first.
pub fn align(raw: &[RawSample], refs: &[ReferenceReading]) -> Alignment {
    let mut by_time: Vec<&RawSample> = raw.iter().collect();
    by_time.sort_by_key(|s| s.timestamp);
    let mut refs_sorted: Vec<&ReferenceReading> = refs.iter().collect();
    refs_sorted.sort_by_key(|r| r.timestamp);

    let mut alignment = Alignment::default();
    for r in refs_sorted {
        let start = minute_floor(r.timestamp);
        let end = start + TimeDelta::seconds(WINDOW_SECONDS);
        let lo = by_time.partition_point(|s| s.timestamp < start);
        let hi = by_time.partition_point(|s| s.timestamp < end);
        let window = &by_time[lo..hi];
        if window.len() == WINDOW_LEN {
            let mut features = [0.0; WINDOW_LEN];
            for (f, s) in features.iter_mut().zip(window) {
                *f = f64::from(s.co2_ppm);
            }
            alignment.examples.push(AlignedExample {
                features,
                target: r.co2_ppm,
                window_start: start,
            });
        } else {
            alignment.dropped.push(DroppedMinute {
                minute: start,
                raw_samples: window.len(),
            });
        }
    }
    alignment
}

/// Splits examples into train and test sets with `|train| = floor(ratio * N)`.
///
/// `Random` shuffles indices with a generator seeded by `seed` and cuts the
/// permutation; `Chronological` cuts the input order directly. Both halves
/// are returned in input order.
pub fn split(
    examples: &[AlignedExample],
    ratio: f64,
    seed: u64,
    strategy: SplitStrategy,
) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let n = examples.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 examples to split, got {n}"
        )));
    }
    // The epsilon keeps products like 0.29 * 100 from flooring to 28.
    let n_train = (ratio * n as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InsufficientData(format!(
            "ratio {ratio} leaves an empty partition for {n} examples"
        )));
    }

    let (train_idx, test_idx) = match strategy {
        SplitStrategy::Chronological => ((0..n_train).collect(), (n_train..n).collect()),
        SplitStrategy::Random => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut test = idx.split_off(n_train);
            idx.sort_unstable();
            test.sort_unstable();
            (idx, test)
        }
    };
    let pick = |ids: Vec<usize>| ids.into_iter().map(|i| examples[i].clone()).collect();
    Ok(DatasetSplit {
        train: pick(train_idx),
        test: pick(test_idx),
        seed,
        strategy,
    })
}
