//! Parse CSV input, group it into one-minute windows and split train/test.

use co2cal::ingest::{self, SplitStrategy};

const RAW: &str = "\
timestamp,node_id,co2_ppm,sensor_temp_c
2022-09-12T00:00:00Z,node-01,436,21.5
2022-09-12T00:00:10Z,node-01,437,21.5
2022-09-12T00:00:20Z,node-01,435,
2022-09-12T00:00:30Z,node-01,438,21.6
2022-09-12T00:00:40Z,node-01,436,21.6
2022-09-12T00:00:50Z,node-01,437,21.6
2022-09-12T00:01:00Z,node-01,439,21.7
2022-09-12T00:01:10Z,node-01,438,21.7
2022-09-12T00:02:00Z,node-01,436,21.7
2022-09-12T00:02:10Z,node-01,435,21.7
2022-09-12T00:02:20Z,node-01,437,21.8
2022-09-12T00:02:30Z,node-01,436,21.8
2022-09-12T00:02:40Z,node-01,434,21.8
2022-09-12T00:02:50Z,node-01,436,21.8
";

const REFERENCE: &str = "\
timestamp,co2_ppm
2022-09-12T00:00:00Z,415.2
2022-09-12T00:01:00Z,415.9
2022-09-12T00:02:00Z,414.8
";

fn main() -> co2cal::Result<()> {
    let raw = ingest::parse_raw_csv(RAW.as_bytes())?;
    let refs = ingest::parse_reference_csv(REFERENCE.as_bytes())?;
    let alignment = ingest::align(&raw, &refs);
    for e in &alignment.examples {
        println!("{} {:?} -> {}", ingest::format_timestamp(&e.window_start), e.features, e.target);
    }
    for d in &alignment.dropped {
        println!("dropped {} ({} samples)", ingest::format_timestamp(&d.minute), d.raw_samples);
    }

    let bad = RAW.replace("437,21.5", "437.5,21.5");
    if let Err(e) = ingest::parse_raw_csv(bad.as_bytes()) {
        println!("rejected: {e}");
    }

    // A full day, split both ways.
    let day = co2cal::synth::generate(&co2cal::SynthConfig::field_day())?;
    let examples = ingest::align(&day.raw, &day.reference).examples;
    for strategy in [SplitStrategy::Random, SplitStrategy::Chronological] {
        let s = ingest::split(&examples, 0.75, 42, strategy)?;
        println!(
            "{strategy}: {} train, {} test, first test window {}",
            s.train.len(),
            s.test.len(),
            ingest::format_timestamp(&s.test[0].window_start)
        );
    }
    Ok(())
}
