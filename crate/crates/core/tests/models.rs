mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use co2cal::ingest::FeatureRow;
use co2cal::models::{
    self, load_model, save_model, train_forest, train_mlp, train_svr, CalibratorModel,
    ForestConfig, MlpConfig, MlpModel, ModelKind, Network, Standardizer, SvrConfig, TrainConfig,
};

fn rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<FeatureRow> {
    (0..n)
        .map(|_| std::array::from_fn(|_| 415.0 + 10.0 * rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

fn noisy_targets(rng: &mut ChaCha8Rng, x: &[FeatureRow]) -> Vec<f64> {
    x.iter()
        .map(|r| r.iter().sum::<f64>() / 6.0 - 21.5 + rng.sample::<f64, _>(StandardNormal))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forest_is_the_mean_of_its_trees(seed in any::<u64>(), n in 2usize..60, trees in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rows(&mut rng, n);
        let y = noisy_targets(&mut rng, &x);
        let cfg = ForestConfig { n_estimators: trees, ..ForestConfig::default() };
        let forest = train_forest(&x, &y, &cfg, seed).unwrap();
        prop_assert_eq!(forest.trees.len(), trees);
        for probe in rows(&mut rng, 10) {
            let mean = forest.trees.iter().map(|t| t.predict(&probe)).sum::<f64>() / trees as f64;
            prop_assert!((forest.predict(&probe) - mean).abs() <= 1e-12);
        }
    }

    #[test]
    fn unbootstrapped_tree_fits_distinct_rows_exactly(seed in any::<u64>(), n in 1usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rows(&mut rng, n);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(380.0..460.0)).collect();
        let cfg = ForestConfig { n_estimators: 1, bootstrap: false, ..ForestConfig::default() };
        if n < 2 {
            prop_assert!(train_forest(&x, &y, &cfg, seed).is_err());
        } else {
            let tree = train_forest(&x, &y, &cfg, seed).unwrap();
            for (r, t) in x.iter().zip(&y) {
                prop_assert_eq!(tree.predict(r), *t);
            }
        }
    }

    #[test]
    fn network_gradient_matches_finite_differences(seed in any::<u64>(), hidden in 1usize..12, batch in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Network::glorot(6, hidden, &mut rng);
        let xs: Vec<f64> = (0..batch * 6).map(|_| rng.sample(StandardNormal)).collect();
        let ys: Vec<f64> = (0..batch).map(|_| rng.sample(StandardNormal)).collect();
        let (_, analytic) = net.loss_and_gradient(&xs, &ys);
        let numeric = common::numeric_gradient(&net, &xs, &ys, 1e-4);
        prop_assert!(common::relative_error(&analytic, &numeric) < 1e-4);
    }

    #[test]
    fn svr_dual_matches_exhaustive_solution(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<FeatureRow> = (0..n).map(|_| std::array::from_fn(|_| rng.sample(StandardNormal))).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (c, eps, gamma) = (rng.random_range(0.1..5.0), rng.random_range(0.0..0.5), rng.random_range(0.01..1.0));
        let k = common::rbf_matrix(&points, gamma);
        let gram = models::Gram::Dense { n, values: k.iter().flatten().copied().collect() };
        let sol = models::solve_dual(&gram, &y, c, eps, 1e-8, 100_000, seed);
        let beta = sol.beta();
        let smo = common::dual_objective(&k, &y, 0.0, &beta) + eps * sol.alpha.iter().sum::<f64>();
        let (best, _) = common::brute_force_dual(&k, &y, c, eps);
        prop_assert!((smo - best).abs() <= 1e-3, "smo {} oracle {}", smo, best);
        prop_assert!(beta.iter().all(|b| b.abs() <= c + 1e-9));
        prop_assert!(beta.iter().sum::<f64>().abs() <= 1e-6);
    }
}

#[test]
fn trained_svr_matches_the_exhaustive_dual_on_four_points() {
    let x: Vec<FeatureRow> = vec![
        [1.0, 2.0, 0.5, 3.0, 1.5, 2.5],
        [2.0, 1.0, 1.5, 2.0, 0.5, 1.0],
        [0.0, 0.5, 2.5, 1.0, 2.0, 0.0],
        [1.5, 2.5, 1.0, 0.0, 1.0, 2.0],
    ];
    let y = [410.0, 418.0, 405.0, 421.0];
    let gamma = 0.2;
    let cfg = SvrConfig {
        gamma: Some(gamma),
        tolerance: 1e-8,
        ..SvrConfig::default()
    };
    let model = train_svr(&x, &y, &cfg, 3).unwrap();

    // standardise exactly as training does, then solve the dual exhaustively
    let col = |j: usize| Standardizer::fit(&x.iter().map(|r| r[j]).collect::<Vec<_>>()).unwrap();
    let scalers: Vec<Standardizer> = (0..6).map(col).collect();
    let z: Vec<FeatureRow> = x
        .iter()
        .map(|r| std::array::from_fn(|j| scalers[j].apply(r[j])))
        .collect();
    let ty = Standardizer::fit(&y).unwrap();
    let yz: Vec<f64> = y.iter().map(|v| ty.apply(*v)).collect();
    let k = common::rbf_matrix(&z, gamma);
    let (_, beta) = common::brute_force_dual(&k, &yz, cfg.c, cfg.epsilon);

    for (i, zi) in z.iter().enumerate() {
        let trained = model
            .support_vectors
            .iter()
            .position(|sv| sv.iter().zip(zi).all(|(a, b)| (a - b).abs() < 1e-9))
            .map_or(0.0, |p| model.dual_coeffs[p]);
        assert!((trained - beta[i]).abs() < 1e-3, "point {i}: {trained} vs {}", beta[i]);
    }
    assert!(model.dual_coeffs.iter().all(|b| b.abs() <= cfg.c + 1e-9));
    assert!(model.dual_coeffs.iter().sum::<f64>().abs() <= 1e-6);
}

#[test]
fn network_learns_a_linear_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<FeatureRow> = (0..200)
        .map(|_| std::array::from_fn(|_| rng.random_range(380.0..460.0)))
        .collect();
    let y: Vec<f64> = x.iter().map(|r| r[0]).collect();
    let (train_x, test_x) = x.split_at(150);
    let (train_y, test_y) = y.split_at(150);
    let cfg = MlpConfig {
        epochs: 500,
        ..MlpConfig::default()
    };
    let model = train_mlp(train_x, train_y, &cfg, 5).unwrap();
    let mae = test_x
        .iter()
        .zip(test_y)
        .map(|(r, t)| (model.predict(r) - t).abs())
        .sum::<f64>()
        / test_y.len() as f64;
    let sd = Standardizer::fit(test_y).unwrap().sd;
    assert!(mae < 0.1 * sd, "MAE {mae} vs sd {sd}");
}

#[test]
fn network_absorbs_an_input_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = rows(&mut rng, 80);
    let y = noisy_targets(&mut rng, &x);
    let shifted: Vec<FeatureRow> = x.iter().map(|r| r.map(|v| v + 50.0)).collect();
    let cfg = MlpConfig {
        hidden_units: 16,
        epochs: 20,
        ..MlpConfig::default()
    };
    let a = train_mlp(&x, &y, &cfg, 9).unwrap();
    let b = train_mlp(&shifted, &y, &cfg, 9).unwrap();
    for (r, s) in x.iter().zip(&shifted) {
        assert!((a.predict(r) - b.predict(s)).abs() < 1e-6);
    }
}

#[test]
fn zero_network_predicts_the_target_mean() {
    let scalers = vec![Standardizer { mean: 415.0, sd: 3.0 }; 6];
    let target = Standardizer { mean: 417.25, sd: 2.0 };
    let model = MlpModel::new(Network::zeros(6, 150), scalers, target).unwrap();
    assert_eq!(model.predict(&[400.0, 410.0, 420.0, 430.0, 440.0, 450.0]), 417.25);
}

#[test]
fn constant_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = rows(&mut rng, 30);
    let y = vec![412.0; 30];
    let err = train_mlp(&x, &y, &MlpConfig::default(), 1).unwrap_err();
    assert!(err.to_string().contains("degenerate target"));
    let svr = train_svr(&x, &y, &SvrConfig::default(), 1).unwrap();
    assert!(svr.support_vectors.is_empty());
    assert_eq!(svr.predict(&x[0]), 412.0);
}

#[test]
fn training_is_deterministic_and_independent_of_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = rows(&mut rng, 150);
    let y = noisy_targets(&mut rng, &x);
    let cfg = TrainConfig {
        seed: 17,
        mlp: MlpConfig {
            hidden_units: 20,
            epochs: 10,
            ..MlpConfig::default()
        },
        ..TrainConfig::default()
    };
    for kind in [ModelKind::Rfr, ModelKind::Ann, ModelKind::Svr] {
        let a = models::train(kind, &x, &y, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let b = pool.install(|| models::train(kind, &x, &y, &cfg)).unwrap();
        assert_eq!(save_model(&a), save_model(&b), "{kind}");
    }
}

#[test]
fn saved_models_predict_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = rows(&mut rng, 120);
    let y = noisy_targets(&mut rng, &x);
    let cfg = TrainConfig {
        mlp: MlpConfig {
            hidden_units: 12,
            epochs: 5,
            ..MlpConfig::default()
        },
        ..TrainConfig::default()
    };
    let probes = rows(&mut rng, 100);
    for kind in [ModelKind::Rfr, ModelKind::Ann, ModelKind::Svr] {
        let model = models::train(kind, &x, &y, &cfg).unwrap();
        let bytes = save_model(&model);
        let back: CalibratorModel = load_model(&bytes).unwrap();
        assert_eq!(back, model);
        for p in &probes {
            assert_eq!(back.predict(p).to_bits(), model.predict(p).to_bits());
        }
        assert!(load_model(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] ^= 0xff;
        assert!(load_model(&bad).is_err());
    }
}
