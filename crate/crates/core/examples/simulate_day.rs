//! Generate a synthetic co-location day and write it as raw/reference CSVs.
//!
//! cargo run --example simulate_day -- [out_dir]

use std::fs::File;
use std::path::PathBuf;

use co2cal::ingest;
use co2cal::synth::{self, SynthConfig};

fn main() -> co2cal::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&out)?;

    let cfg = SynthConfig {
        bias_ppm: 18.0,
        gain_error_fraction: 0.02,
        drift_ppm_per_day: 3.0,
        ..SynthConfig::field_day()
    };
    let day = synth::generate(&cfg)?;
    println!("{} raw samples, {} reference minutes", day.raw.len(), day.reference.len());
    for s in day.raw.iter().take(6) {
        println!("  {}  {} ppm", ingest::format_timestamp(&s.timestamp), s.co2_ppm);
    }

    ingest::write_raw_csv(File::create(out.join("raw.csv"))?, &day.raw)?;
    ingest::write_reference_csv(File::create(out.join("reference.csv"))?, &day.reference)?;
    println!("wrote raw.csv and reference.csv to {}", out.display());

    // Without bias, gain, noise or drift the sensor only rounds.
    let ideal = synth::generate(&SynthConfig::ideal())?;
    let windows = ingest::align(&ideal.raw, &ideal.reference).examples;
    let worst = windows
        .iter()
        .map(|e| (co2cal::pipeline::raw_baseline(e) - e.target).abs())
        .fold(0.0, f64::max);
    println!("ideal sensor: worst window-mean error {worst:.3} ppm");
    Ok(())
}
