//! Histogram-based entropy, KL and JS divergence between two samples.

use co2cal::metrics::{self, ProbabilityDistribution};

fn main() -> co2cal::Result<()> {
    let p = ProbabilityDistribution::from_probabilities(vec![0.5, 0.5])?;
    let q = ProbabilityDistribution::from_probabilities(vec![0.25, 0.75])?;
    println!("H(P) = {:.5}  H(Q) = {:.5}", metrics::entropy(&p), metrics::entropy(&q));
    println!("KL(P||Q) = {:.5}  KL(Q||P) = {:.5}", metrics::kl_divergence(&p, &q)?, metrics::kl_divergence(&q, &p)?);
    println!("JS(P,Q) = {:.5} (at most ln 2 = {:.5})", metrics::js_divergence(&p, &q)?, std::f64::consts::LN_2);

    // Two sample sets on shared bins: a reference series and a biased copy.
    let reference: Vec<f64> = (0..500).map(|i| 415.0 + 4.0 * (f64::from(i) / 40.0).sin()).collect();
    for offset in [0.0, 1.0, 4.0, 21.5] {
        let shifted: Vec<f64> = reference.iter().map(|v| v + offset).collect();
        let (a, b) = metrics::histogram_pair(&reference, &shifted, metrics::DEFAULT_BINS)?;
        println!(
            "offset {offset:>5.1} ppm: KL {:>7.3}  JS {:.3}",
            metrics::kl_divergence(&a, &b)?,
            metrics::js_divergence(&a, &b)?
        );
    }
    Ok(())
}
