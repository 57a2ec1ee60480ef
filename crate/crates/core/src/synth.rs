//! Synthetic co-location data.
//!
//! The true concentration is a slow signal
//!
//! ```text
//! s(t) = baseline + diurnal * sin(2πt / 24 h) + wander(t)
//! ```
//!
//! where `wander` is a sum of three seeded sinusoids with periods between
//! 3 h and 9 h whose amplitudes add up to `wander_ppm`. Each reference
//! reading is the exact average of `s` over its minute. Each raw reading is
//!
//! ```text
//! round((1 + gain_error) * s(t) + bias + drift * t_days + N(0, noise_sd))
//! ```
//!
//! clamped at zero. Noise, wander and dropout placement draw from separate
//! generator streams so changing one knob does not reshuffle the others.

use std::f64::consts::TAU;

use chrono::{DateTime, TimeDelta};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{RawSample, ReferenceReading, Timestamp, WINDOW_SECONDS};

const SECONDS_PER_DAY: f64 = 86_400.0;
const WANDER_COMPONENTS: usize = 3;

const STREAM_NOISE: u64 = 1;
const STREAM_WANDER: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

/// Missing-data pattern applied after generation.
///
/// `missing_ref_minutes` reference minutes are removed outright.
/// `incomplete_minutes` other reference minutes each lose at least one raw
/// sample. `missing_raw_samples` is the total number of raw samples removed:
/// first one from each incomplete minute, then every sample of the gap
/// minutes, then further samples from the incomplete minutes round-robin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropoutShape {
    pub missing_ref_minutes: usize,
    pub incomplete_minutes: usize,
    pub missing_raw_samples: usize,
}

impl DropoutShape {
    /// One day with 8525 raw samples, 1432 reference minutes and 1420
    /// complete six-sample windows.
    pub fn field_day() -> Self {
        DropoutShape {
            missing_ref_minutes: 8,
            incomplete_minutes: 12,
            missing_raw_samples: 115,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub duration_hours: f64,
    pub baseline_ppm: f64,
    pub diurnal_amplitude_ppm: f64,
    /// Peak amplitude of the seeded slow wander.
    pub wander_ppm: f64,
    pub bias_ppm: f64,
    pub gain_error_fraction: f64,
    pub noise_sd_ppm: f64,
    pub drift_ppm_per_day: f64,
    pub raw_period_s: u32,
    pub ref_period_s: u32,
    pub seed: u64,
    pub start: Timestamp,
    pub node_id: String,
    pub dropout: Option<DropoutShape>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            duration_hours: 24.0,
            baseline_ppm: 415.0,
            diurnal_amplitude_ppm: 4.0,
            wander_ppm: 1.5,
            bias_ppm: 21.5,
            gain_error_fraction: 0.0,
            noise_sd_ppm: 2.0,
            drift_ppm_per_day: 0.0,
            raw_period_s: 10,
            ref_period_s: 60,
            seed: 42,
            start: DateTime::from_timestamp(1_662_940_800, 0).expect("valid epoch"), // 2022-09-12T00:00:00Z
            node_id: "node-01".to_string(),
            dropout: None,
        }
    }
}

impl SynthConfig {
    /// The default error model on a day with the field dropout shape.
    pub fn field_day() -> Self {
        SynthConfig {
            dropout: Some(DropoutShape::field_day()),
            ..SynthConfig::default()
        }
    }

    /// A perfect sensor: no bias, gain error, drift or noise.
    pub fn ideal() -> Self {
        SynthConfig {
            bias_ppm: 0.0,
            gain_error_fraction: 0.0,
            noise_sd_ppm: 0.0,
            drift_ppm_per_day: 0.0,
            ..SynthConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let reals = [
            ("duration_hours", self.duration_hours),
            ("baseline_ppm", self.baseline_ppm),
            ("diurnal_amplitude_ppm", self.diurnal_amplitude_ppm),
            ("wander_ppm", self.wander_ppm),
            ("bias_ppm", self.bias_ppm),
            ("gain_error_fraction", self.gain_error_fraction),
            ("noise_sd_ppm", self.noise_sd_ppm),
            ("drift_ppm_per_day", self.drift_ppm_per_day),
        ];
        if let Some((name, _)) = reals.iter().find(|(_, v)| !v.is_finite()) {
            return bad(format!("{name} must be finite"));
        }
        if self.duration_hours <= 0.0 {
            return bad("duration_hours must be positive".into());
        }
        if self.noise_sd_ppm < 0.0 {
            return bad("noise_sd_ppm must be non-negative".into());
        }
        if self.gain_error_fraction <= -1.0 {
            return bad("gain_error_fraction must exceed -1".into());
        }
        if self.baseline_ppm - self.diurnal_amplitude_ppm.abs() - self.wander_ppm.abs() <= 0.0 {
            return bad("true concentration must stay positive".into());
        }
        if self.raw_period_s == 0 || WINDOW_SECONDS as u32 % self.raw_period_s != 0 {
            return bad(format!(
                "raw_period_s must divide {WINDOW_SECONDS}, got {}",
                self.raw_period_s
            ));
        }
        if self.ref_period_s == 0 || self.ref_period_s % WINDOW_SECONDS as u32 != 0 {
            return bad(format!(
                "ref_period_s must be a positive multiple of {WINDOW_SECONDS}, got {}",
                self.ref_period_s
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDay {
    pub raw: Vec<RawSample>,
    pub reference: Vec<ReferenceReading>,
}

#[derive(Debug, Clone, Copy)]
struct Sinusoid {
    amplitude: f64,
    omega: f64,
    phase: f64,
}

impl Sinusoid {
    fn at(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * t + self.phase).sin()
    }

    /// Exact mean over `[t, t + len)`.
    fn mean_over(&self, t: f64, len: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let a = self.omega * t + self.phase;
        let b = self.omega * (t + len) + self.phase;
        self.amplitude * (a.cos() - b.cos()) / (self.omega * len)
    }
}

struct TrueSignal {
    baseline: f64,
    parts: Vec<Sinusoid>,
}

impl TrueSignal {
    fn new(cfg: &SynthConfig) -> Self {
        let mut rng = stream(cfg.seed, STREAM_WANDER);
        let mut parts = vec![Sinusoid {
            amplitude: cfg.diurnal_amplitude_ppm,
            omega: TAU / SECONDS_PER_DAY,
            phase: 0.0,
        }];
        for _ in 0..WANDER_COMPONENTS {
            let period_h: f64 = rng.random_range(3.0..9.0);
            let phase: f64 = rng.random_range(0.0..TAU);
            parts.push(Sinusoid {
                amplitude: cfg.wander_ppm / WANDER_COMPONENTS as f64,
                omega: TAU / (period_h * 3600.0),
                phase,
            });
        }
        TrueSignal {
            baseline: cfg.baseline_ppm,
            parts,
        }
    }

    fn at(&self, t: f64) -> f64 {
        self.baseline + self.parts.iter().map(|p| p.at(t)).sum::<f64>()
    }

    fn mean_over(&self, t: f64, len: f64) -> f64 {
        self.baseline + self.parts.iter().map(|p| p.mean_over(t, len)).sum::<f64>()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Generates a raw/reference stream pair. Deterministic given `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<SyntheticDay> {
    cfg.validate()?;
    let total_s = cfg.duration_hours * 3600.0;
    let n_raw = (total_s / f64::from(cfg.raw_period_s)).floor() as usize;
    let n_ref = (total_s / f64::from(cfg.ref_period_s)).floor() as usize;
    let signal = TrueSignal::new(cfg);

    let mut noise_rng = stream(cfg.seed, STREAM_NOISE);
    let gain = 1.0 + cfg.gain_error_fraction;
    let mut raw_values: Vec<Option<u32>> = (0..n_raw)
        .map(|k| {
            let t = (k as u64 * u64::from(cfg.raw_period_s)) as f64;
            let z: f64 = noise_rng.sample(StandardNormal);
            let reading = gain * signal.at(t)
                + cfg.bias_ppm
                + cfg.drift_ppm_per_day * t / SECONDS_PER_DAY
                + cfg.noise_sd_ppm * z;
            Some(reading.round().max(0.0) as u32)
        })
        .collect();

    let mut ref_present = vec![true; n_ref];
    if let Some(shape) = cfg.dropout {
        apply_dropout(cfg, shape, &mut raw_values, &mut ref_present)?;
    }

    let at = |secs: u64| cfg.start + TimeDelta::seconds(secs as i64);
    let raw = raw_values
        .into_iter()
        .enumerate()
        .filter_map(|(k, v)| {
            v.map(|co2_ppm| RawSample {
                timestamp: at(k as u64 * u64::from(cfg.raw_period_s)),
                node_id: cfg.node_id.clone(),
                co2_ppm,
                sensor_temp_c: None,
            })
        })
        .collect();
    let reference = (0..n_ref)
        .filter(|&m| ref_present[m])
        .map(|m| {
            let t = m as u64 * u64::from(cfg.ref_period_s);
            ReferenceReading {
                timestamp: at(t),
                co2_ppm: signal.mean_over(t as f64, WINDOW_SECONDS as f64),
            }
        })
        .collect();
    Ok(SyntheticDay { raw, reference })
}

fn apply_dropout(
    cfg: &SynthConfig,
    shape: DropoutShape,
    raw: &mut [Option<u32>],
    ref_present: &mut [bool],
) -> Result<()> {
    let per_window = (WINDOW_SECONDS as u32 / cfg.raw_period_s) as usize;
    let ticks_per_ref = (cfg.ref_period_s / cfg.raw_period_s) as usize;
    // Only minutes whose window lies entirely inside the raw stream qualify.
    let usable: Vec<usize> = (0..ref_present.len())
        .filter(|m| m * ticks_per_ref + per_window <= raw.len())
        .collect();
    let wanted = shape.missing_ref_minutes + shape.incomplete_minutes;
    if wanted > usable.len() {
        return Err(Error::Config(format!(
            "dropout needs {wanted} distinct minutes, only {} available",
            usable.len()
        )));
    }
    if shape.missing_raw_samples < shape.incomplete_minutes {
        return Err(Error::Config(
            "each incomplete minute must lose at least one raw sample".into(),
        ));
    }
    let capacity = shape.missing_ref_minutes * per_window + shape.incomplete_minutes * per_window;
    if shape.missing_raw_samples > capacity {
        return Err(Error::Config(format!(
            "cannot remove {} raw samples from the chosen minutes (capacity {capacity})",
            shape.missing_raw_samples
        )));
    }

    let mut rng = stream(cfg.seed, STREAM_DROPOUT);
    let mut minutes = usable;
    minutes.shuffle(&mut rng);
    let gaps = &minutes[..shape.missing_ref_minutes];
    let incomplete = &minutes[shape.missing_ref_minutes..wanted];

    // Per-minute removal order over the window's tick offsets.
    let mut order = |m: usize| {
        let mut offs: Vec<usize> = (0..per_window).map(|o| m * ticks_per_ref + o).collect();
        offs.shuffle(&mut rng);
        offs
    };
    let mut gap_orders: Vec<Vec<usize>> = gaps.iter().map(|&m| order(m)).collect();
    let mut inc_orders: Vec<Vec<usize>> = incomplete.iter().map(|&m| order(m)).collect();

    for &m in gaps {
        ref_present[m] = false;
    }
    let mut remaining = shape.missing_raw_samples;
    for offs in inc_orders.iter_mut() {
        raw[offs.pop().expect("window has samples")] = None;
        remaining -= 1;
    }
    for offs in gap_orders.iter_mut() {
        while remaining > 0 {
            match offs.pop() {
                Some(k) => {
                    raw[k] = None;
                    remaining -= 1;
                }
                None => break,
            }
        }
    }
    while remaining > 0 {
        for offs in inc_orders.iter_mut() {
            if remaining == 0 {
                break;
            }
            if let Some(k) = offs.pop() {
                raw[k] = None;
                remaining -= 1;
            }
        }
    }
    Ok(())
}
