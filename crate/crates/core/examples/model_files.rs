//! Save trained calibrators to the binary model format and load them back.

use co2cal::ingest::{self, FeatureRow};
use co2cal::models::{self, persist, MlpConfig, ModelKind, TrainConfig};
use co2cal::synth::{self, SynthConfig};

fn main() -> co2cal::Result<()> {
    let day = synth::generate(&SynthConfig::field_day())?;
    let examples = ingest::align(&day.raw, &day.reference).examples;
    let x: Vec<FeatureRow> = examples.iter().map(|e| e.features).collect();
    let y: Vec<f64> = examples.iter().map(|e| e.target).collect();
    let cfg = TrainConfig {
        mlp: MlpConfig { epochs: 20, ..MlpConfig::default() },
        ..TrainConfig::default()
    };

    let dir = std::env::temp_dir();
    for kind in [ModelKind::Rfr, ModelKind::Ann, ModelKind::Svr] {
        let model = models::train(kind, &x, &y, &cfg)?;
        let path = dir.join(format!("model_{kind}.bin"));
        persist::write_model_file(&path, &model)?;
        let back = persist::read_model_file(&path)?;
        let same = x.iter().all(|r| back.predict(r).to_bits() == model.predict(r).to_bits());
        println!(
            "{kind}: {} bytes at {}, predictions identical after reload: {same}",
            std::fs::metadata(&path)?.len(),
            path.display()
        );
    }

    let mut bytes = persist::save_model(&models::train(ModelKind::Rfr, &x, &y, &cfg)?);
    bytes.truncate(bytes.len() / 2);
    if let Err(e) = persist::load_model(&bytes) {
        println!("truncated file rejected: {e}");
    }
    Ok(())
}
