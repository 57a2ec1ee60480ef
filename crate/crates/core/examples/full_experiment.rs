//! The whole comparison: raw sensor against the three calibrators.
//!
//! cargo run --release --example full_experiment -- [out_dir]

use std::path::PathBuf;

use co2cal::pipeline::{self, ExperimentConfig};

fn main() -> co2cal::Result<()> {
    let cfg = ExperimentConfig {
        sweep: Some((1..=50).collect()),
        ..ExperimentConfig::default()
    };
    let result = pipeline::run_experiment(&cfg)?;
    print!("{}", pipeline::render_report(&result));

    if let Some(out) = std::env::args().nth(1).map(PathBuf::from) {
        for path in pipeline::write_outputs(&result, &out)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
