//! RBF support vector regression, including the bare dual solver.

use co2cal::ingest::{self, SplitStrategy};
use co2cal::metrics;
use co2cal::models::{solve_dual, train_svr, Gram, SvrConfig};
use co2cal::synth::{self, SynthConfig};

fn main() -> co2cal::Result<()> {
    // The solver on its own: three points on a line, ε = 0.1, C = 10.
    let points = [[0.0; 6], [1.0, 0.0, 0.0, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 0.0, 0.0, 0.0]];
    let sol = solve_dual(&Gram::rbf(&points, 0.5), &[0.0, 1.0, 2.0], 10.0, 0.1, 1e-8, 10_000, 0);
    println!("coefficients {:?}, offset {:.4}, {} iterations", sol.beta(), sol.rho, sol.iterations);

    let day = synth::generate(&SynthConfig::field_day())?;
    let examples = ingest::align(&day.raw, &day.reference).examples;
    let s = ingest::split(&examples, 0.75, 42, SplitStrategy::Random)?;
    let x: Vec<_> = s.train.iter().map(|e| e.features).collect();
    let y: Vec<_> = s.train.iter().map(|e| e.target).collect();

    let model = train_svr(&x, &y, &SvrConfig::default(), 42)?;
    println!(
        "{} support vectors of {}, gamma {:.4}, converged {}",
        model.support_vectors.len(),
        x.len(),
        model.gamma,
        model.converged
    );
    let truth: Vec<f64> = s.test.iter().map(|e| e.target).collect();
    let pred: Vec<f64> = s.test.iter().map(|e| model.predict(&e.features)).collect();
    println!("SVR MAE {:.2} ppm", metrics::mae(&truth, &pred)?);
    Ok(())
}
