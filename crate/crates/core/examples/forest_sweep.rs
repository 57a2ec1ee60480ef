//! Random forest accuracy as the number of trees grows.

use co2cal::ingest::{self, SplitStrategy};
use co2cal::models::{sweep_estimators, ForestConfig};
use co2cal::synth::{self, SynthConfig};

fn main() -> co2cal::Result<()> {
    let day = synth::generate(&SynthConfig::field_day())?;
    let examples = ingest::align(&day.raw, &day.reference).examples;
    let s = ingest::split(&examples, 0.75, 42, SplitStrategy::Random)?;

    let sizes = [1, 2, 5, 10, 15, 20, 30, 50];
    let points = sweep_estimators(&s.train, &s.test, &sizes, &ForestConfig::default(), 42, 50)?;
    println!("trees   MAE (ppm)   R²      JS");
    for p in &points {
        println!(
            "{:>5}   {:>9.3}   {:.3}   {:.3}",
            p.n_estimators, p.report.mae_ppm, p.report.r2, p.report.js_divergence
        );
    }
    Ok(())
}
