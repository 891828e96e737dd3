mod oracles;

use bandsel::dataset::{gen_gaussian, Dataset};
use bandsel::kernel::gram_matrix;
use bandsel::svdd::{fit, model_stats, SvddConfig, SvddModel};
use bandsel::Bandwidth;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(rng: &mut ChaCha8Rng, l: usize, n: usize) -> Dataset {
    let rows = (0..l).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    Dataset::new("r", rows).unwrap()
}

#[test]
fn gram_matrix_is_positive_semidefinite() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for gamma in [0.01, 0.3, 1.0, 10.0, 1e4] {
        let data = random_points(&mut rng, 25, 3);
        let gram = gram_matrix(&data, Bandwidth::new(gamma).unwrap());
        let m = DMatrix::from_row_slice(25, 25, gram.as_flat());
        let min_eig = m.symmetric_eigen().eigenvalues.min();
        assert!(min_eig > -1e-10, "gamma {gamma}: smallest eigenvalue {min_eig}");
    }
}

#[test]
fn solver_matches_projected_gradient_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..12 {
        let l = rng.random_range(2..=10);
        let n = rng.random_range(1..=3);
        let nu = [0.3, 0.5, 1.0][case % 3];
        let data = random_points(&mut rng, l, n);
        let gamma = Bandwidth::new(10f64.powf(rng.random_range(-1.0..1.0))).unwrap();
        let config = SvddConfig {
            solver_tolerance: 1e-12,
            ..SvddConfig::with_nu(nu)
        };
        let model = fit(&data, gamma, &config, case as u64).unwrap();
        let gram = gram_matrix(&data, gamma);
        let (_, oracle, residual) = oracles::qp_oracle(gram.as_flat(), l, config.cap(l), 1e-10);
        assert!(residual < 1e-10, "oracle did not converge: {residual}");
        let ours = oracles::quad_form(gram.as_flat(), l, model.alphas());
        assert!(
            (ours - oracle).abs() <= 1e-6 * oracle.abs(),
            "case {case}: solver {ours} oracle {oracle}"
        );
    }
}

#[test]
fn nu_one_gives_uniform_weights() {
    let data = gen_gaussian(1, 30, &[0.0, 0.0], 1.0).unwrap();
    let model = fit(&data, Bandwidth::new(1.0).unwrap(), &SvddConfig::with_nu(1.0), 0).unwrap();
    for &a in model.alphas() {
        assert!((a - 1.0 / 30.0).abs() < 1e-15);
    }
}

#[test]
fn model_json_round_trip_is_exact() {
    let data = gen_gaussian(5, 40, &[0.0, 1.0, 2.0], 1.0).unwrap();
    let model = fit(&data, Bandwidth::new(2.0).unwrap(), &SvddConfig::with_nu(0.2), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    model.save(&path).unwrap();
    let back = SvddModel::load(&path).unwrap();
    assert_eq!(back.alphas(), model.alphas());
    assert_eq!(back.rho(), model.rho());
    let probe = gen_gaussian(6, 50, &[0.0, 1.0, 2.0], 2.0).unwrap();
    for x in probe.rows() {
        assert_eq!(back.decision_value(x).unwrap(), model.decision_value(x).unwrap());
    }
}

fn dataset_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3usize..25, 1usize..4).prop_flat_map(|(l, n)| prop::collection::vec(prop::collection::vec(-3.0f64..3.0, n), l))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kkt_conditions_hold(rows in dataset_strategy(), nu in 0.05f64..=1.0, log_gamma in -1.0f64..2.0, seed in any::<u64>()) {
        let data = Dataset::new("p", rows).unwrap();
        let l = data.len();
        let config = SvddConfig::with_nu(nu);
        let cap = config.cap(l);
        let model = fit(&data, Bandwidth::new(10f64.powf(log_gamma)).unwrap(), &config, seed).unwrap();
        let a = model.alphas();
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(a.iter().all(|&v| (0.0..=cap).contains(&v)));
        prop_assert!(model.kkt_violation() <= config.solver_tolerance);

        // KKT from scratch: max g over a > 0 minus min g over a < cap
        let gram = gram_matrix(&data, model.gamma());
        let g: Vec<f64> = (0..l).map(|i| gram.row(i).iter().zip(a).map(|(k, x)| k * x).sum()).collect();
        let down = (0..l).filter(|&i| a[i] > 0.0).map(|i| g[i]).fold(f64::NEG_INFINITY, f64::max);
        let up = (0..l).filter(|&i| a[i] < cap).map(|i| g[i]).fold(f64::INFINITY, f64::min);
        prop_assert!(down - up <= config.solver_tolerance + 1e-12);
        let stats = model_stats(&model, &data).unwrap();
        prop_assert!(stats.sv_fraction > 0.0 && stats.sv_fraction <= 1.0);
    }

    #[test]
    fn translation_leaves_decisions_unchanged(rows in dataset_strategy(), shift in -50.0f64..50.0, seed in any::<u64>()) {
        let data = Dataset::new("p", rows.clone()).unwrap();
        let moved = Dataset::new("q", rows.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect()).unwrap();
        let config = SvddConfig::with_nu(0.3);
        let gamma = Bandwidth::new(2.0).unwrap();
        let a = fit(&data, gamma, &config, seed).unwrap();
        let b = fit(&moved, gamma, &config, seed).unwrap();
        for (x, y) in data.rows().zip(moved.rows()) {
            prop_assert!((a.decision_value(x).unwrap() - b.decision_value(y).unwrap()).abs() < 1e-5);
        }
    }
}
