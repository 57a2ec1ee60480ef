//! Train the 6-input tanh network and compare it with the raw sensor.

use co2cal::ingest::{self, SplitStrategy};
use co2cal::metrics;
use co2cal::models::{train_mlp, MlpConfig};
use co2cal::pipeline::raw_baseline;
use co2cal::synth::{self, SynthConfig};

fn main() -> co2cal::Result<()> {
    let day = synth::generate(&SynthConfig::field_day())?;
    let examples = ingest::align(&day.raw, &day.reference).examples;
    let s = ingest::split(&examples, 0.75, 42, SplitStrategy::Random)?;
    let x: Vec<_> = s.train.iter().map(|e| e.features).collect();
    let y: Vec<_> = s.train.iter().map(|e| e.target).collect();

    let cfg = MlpConfig { epochs: 200, ..MlpConfig::default() };
    let model = train_mlp(&x, &y, &cfg, 42)?;
    println!("layers {:?}, {} parameters", model.layer_sizes, model.network.params().len());

    let truth: Vec<f64> = s.test.iter().map(|e| e.target).collect();
    let raw: Vec<f64> = s.test.iter().map(raw_baseline).collect();
    let pred: Vec<f64> = s.test.iter().map(|e| model.predict(&e.features)).collect();
    println!("raw MAE {:.2} ppm", metrics::mae(&truth, &raw)?);
    println!("ANN MAE {:.2} ppm, R² {:.3}", metrics::mae(&truth, &pred)?, metrics::r2(&truth, &pred)?);
    Ok(())
}
