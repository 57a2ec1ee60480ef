use proptest::prelude::*;

use co2cal::metrics::{self, ProbabilityDistribution, DEFAULT_BINS, SMOOTHING};

fn distribution(weights: Vec<f64>) -> ProbabilityDistribution {
    let total: f64 = weights.iter().sum();
    ProbabilityDistribution::from_probabilities(weights.iter().map(|w| w / total).collect()).unwrap()
}

fn pair() -> impl Strategy<Value = (ProbabilityDistribution, ProbabilityDistribution)> {
    (2usize..64).prop_flat_map(|n| {
        let weights = prop::collection::vec(
            prop_oneof![1 => Just(SMOOTHING), 4 => 1e-6f64..1.0],
            n,
        );
        (weights.clone(), weights).prop_map(|(a, b)| (distribution(a), distribution(b)))
    })
}

fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    prop::collection::vec((300.0f64..600.0, -40.0f64..40.0), 2..200).prop_map(|rows| {
        rows.into_iter().map(|(y, e)| (y, y + e)).unzip()
    })
}

proptest! {
    #[test]
    fn kl_is_nonnegative_and_zero_on_itself((p, q) in pair()) {
        prop_assert!(metrics::kl_divergence(&p, &q).unwrap() >= 0.0);
        prop_assert!(metrics::kl_divergence(&p, &p).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn js_is_symmetric_bounded_and_matches_mixture_form((p, q) in pair()) {
        let js = metrics::js_divergence(&p, &q).unwrap();
        prop_assert!((js - metrics::js_divergence(&q, &p).unwrap()).abs() <= 1e-12);
        prop_assert!((0.0..=std::f64::consts::LN_2).contains(&js));
        let m: Vec<f64> = p.probabilities().iter().zip(q.probabilities()).map(|(a, b)| (a + b) / 2.0).collect();
        let m = ProbabilityDistribution::from_probabilities(m).unwrap();
        let mix = 0.5 * metrics::kl_divergence(&p, &m).unwrap() + 0.5 * metrics::kl_divergence(&q, &m).unwrap();
        prop_assert!((mix - js).abs() <= 1e-9);
    }

    #[test]
    fn entropy_is_bounded_by_log_bins((p, _) in pair()) {
        let h = metrics::entropy(&p);
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (p.n_bins() as f64).ln() + 1e-12);
    }

    #[test]
    fn mae_is_zero_exactly_on_equal_series((y, yhat) in series()) {
        prop_assert_eq!(metrics::mae(&y, &y).unwrap(), 0.0);
        let m = metrics::mae(&y, &yhat).unwrap();
        let differs = y.iter().zip(&yhat).any(|(a, b)| a != b);
        prop_assert_eq!(m > 0.0, differs);
    }

    #[test]
    fn r2_of_the_mean_predictor_is_zero((y, _) in series()) {
        prop_assume!(y.iter().any(|v| *v != y[0]));
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let r2 = metrics::r2(&y, &vec![mean; y.len()]).unwrap();
        prop_assert!(r2.abs() <= 1e-12, "r2 = {}", r2);
    }

    #[test]
    fn accuracy_is_scale_invariant((y, yhat) in series(), k in 0.01f64..100.0) {
        let a = metrics::accuracy_pct(&y, &yhat).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v * k).collect();
        let yhats: Vec<f64> = yhat.iter().map(|v| v * k).collect();
        let b = metrics::accuracy_pct(&ys, &yhats).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn histograms_share_edges_and_normalise((y, yhat) in series(), bins in 2usize..80) {
        let (p, q) = metrics::histogram_pair(&y, &yhat, bins).unwrap();
        prop_assert_eq!(p.edges(), q.edges());
        prop_assert_eq!(p.n_bins(), bins);
        for d in [&p, &q] {
            let total: f64 = d.probabilities().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
            prop_assert!(d.probabilities().iter().all(|v| *v > 0.0));
        }
        let lo = y.iter().chain(&yhat).copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().chain(&yhat).copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(p.edges()[0] <= lo && *p.edges().last().unwrap() >= hi);
    }
}

#[test]
fn perfect_prediction_scores_perfectly() {
    let y: Vec<f64> = (0..100).map(|i| 400.0 + f64::from(i) * 0.3).collect();
    let r = metrics::evaluate(&y, &y, DEFAULT_BINS).unwrap();
    assert_eq!(r.accuracy_pct, 100.0);
    assert_eq!(r.mae_ppm, 0.0);
    assert_eq!(r.r2, 1.0);
    assert!(r.kl_divergence.abs() < 1e-12);
    assert!(r.js_divergence.abs() < 1e-12);
    assert_eq!(r.n_test, 100);
}

#[test]
fn constant_offset_gives_the_offset_as_mae() {
    let y: Vec<f64> = (0..50).map(|i| 413.0 + f64::from(i) * 0.08).collect();
    let yhat: Vec<f64> = y.iter().map(|v| v + 21.51).collect();
    let r = metrics::evaluate(&y, &yhat, DEFAULT_BINS).unwrap();
    assert!((r.mae_ppm - 21.51).abs() < 1e-9);
    let rel = y.iter().map(|v| 21.51 / v).sum::<f64>() / 50.0;
    assert!((r.accuracy_pct - 100.0 * (1.0 - rel)).abs() < 1e-9);
    assert!(r.r2 < 0.0);
    // disjoint supports: the divergence saturates
    assert!((r.js_divergence - std::f64::consts::LN_2).abs() < 1e-6);
}
