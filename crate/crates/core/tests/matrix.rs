mod common;

use common::{random_matrix, random_simplex, rel_err};
use rand::Rng;
use vmg_core::game_core::{
    random_payoff_model, reg_game_value, seeded_rng, FeatureTable, LinearPayoffModel, MatrixDataset, NoiseKind,
    NoiseOracle, RegGameSpec, Simplex,
};
use vmg_core::linalg::{dot, Matrix};
use vmg_core::matrix_vmg::{
    best_response_max, best_response_min, duality_gap, max_value, min_value, model_objective, model_objective_grad,
    run_vmg_matrix_detailed, run_vmg_symmetric_detailed, solve_matrix_ne, update_model, MatrixVmgConfig,
    ModelOptSettings,
};
use vmg_core::oracle::{exact_ne_lp, finite_diff_grad};
use vmg_core::AlphaSchedule;

fn rows(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.rows()).map(|i| a.row(i).to_vec()).collect()
}

/// Entropic mirror ascent on `mu -> mu^T A nu - beta KL(mu || mu_ref)`.
fn iterative_best_response(a: &Matrix, nu: &Simplex, spec: &RegGameSpec) -> Vec<f64> {
    let payoff = a.mul_vec(nu.as_slice());
    let r = spec.mu_ref.as_slice();
    let eta = 0.5 / spec.beta;
    let mut x = vec![1.0 / r.len() as f64; r.len()];
    for _ in 0..500 {
        let logits: Vec<f64> = (0..x.len())
            .map(|i| x[i].ln() + eta * (payoff[i] - spec.beta * ((x[i] / r[i]).ln() + 1.0)))
            .collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = w.iter().sum();
        x = w.iter().map(|v| v / z).collect();
    }
    x
}

#[test]
fn rock_paper_scissors_matches_lp() {
    let a = Matrix::from_rows(&[vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 1.0, 0.0]]).unwrap();
    let spec = RegGameSpec::uniform(0.0, 3, 3).unwrap();
    let (mu, nu) = solve_matrix_ne(&a, &spec, 1e-8).unwrap();
    let lp = exact_ne_lp(&rows(&a)).unwrap();
    for k in 0..3 {
        assert!((mu.as_slice()[k] - lp.mu[k]).abs() < 1e-4);
        assert!((nu.as_slice()[k] - lp.nu[k]).abs() < 1e-4);
    }
    assert!(lp.value.abs() < 1e-12);
}

#[test]
fn solver_value_agrees_with_lp_on_random_games() {
    let mut rng = seeded_rng(21);
    for _ in 0..20 {
        let (m, n) = (rng.random_range(2..7), rng.random_range(2..7));
        let a = random_matrix(&mut rng, m, n);
        let spec = RegGameSpec::uniform(0.0, m, n).unwrap();
        let (mu, nu) = solve_matrix_ne(&a, &spec, 1e-8).unwrap();
        let lp = exact_ne_lp(&rows(&a)).unwrap();
        assert!((a.bilinear(mu.as_slice(), nu.as_slice()) - lp.value).abs() < 1e-6);
        assert!(duality_gap(&a, &mu, &nu, &spec).unwrap() <= 1e-8);
        let lp_mu = Simplex::new(lp.mu.clone()).unwrap();
        let lp_nu = Simplex::new(lp.nu.clone()).unwrap();
        assert!(duality_gap(&a, &lp_mu, &lp_nu, &spec).unwrap() <= 1e-8);
    }
}

#[test]
fn closed_form_best_response_matches_iterative_maximizer() {
    let mut rng = seeded_rng(3);
    for beta in [0.1, 1.0, 10.0] {
        for _ in 0..5 {
            let a = random_matrix(&mut rng, 4, 3);
            let spec = RegGameSpec::new(beta, random_simplex(&mut rng, 4), random_simplex(&mut rng, 3)).unwrap();
            let nu = random_simplex(&mut rng, 3);
            let closed = best_response_max(&a, &nu, &spec).unwrap();
            let iterative = iterative_best_response(&a, &nu, &spec);
            let err = closed.as_slice().iter().zip(&iterative).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-7, "beta {beta}: {err:e}");
        }
    }
}

#[test]
fn bandit_column_best_response() {
    let a = Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
    let spec = RegGameSpec::uniform(1.0, 2, 1).unwrap();
    let nu = Simplex::uniform(1);
    let br = best_response_max(&a, &nu, &spec).unwrap();
    let e = std::f64::consts::E;
    assert!((br.as_slice()[0] - e / (1.0 + e)).abs() < 1e-12);
    assert!((br.as_slice()[0] - 0.731059).abs() < 1e-6);
    let iterative = iterative_best_response(&a, &nu, &spec);
    assert!((iterative[0] - 0.731059).abs() < 1e-6);
}

#[test]
fn constant_shift_moves_both_values_by_the_constant() {
    let mut rng = seeded_rng(8);
    for beta in [0.0, 0.3, 2.0] {
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 4, 5);
            let c: f64 = rng.random_range(-3.0..3.0);
            let shifted = a.map(|x| x + c);
            let spec = RegGameSpec::uniform(beta, 4, 5).unwrap();
            let mu = random_simplex(&mut rng, 4);
            let nu = random_simplex(&mut rng, 5);
            assert!((max_value(&shifted, &nu, &spec).unwrap() - max_value(&a, &nu, &spec).unwrap() - c).abs() < 1e-10);
            assert!((min_value(&shifted, &mu, &spec).unwrap() - min_value(&a, &mu, &spec).unwrap() - c).abs() < 1e-10);
            let g0 = duality_gap(&a, &mu, &nu, &spec).unwrap();
            let g1 = duality_gap(&shifted, &mu, &nu, &spec).unwrap();
            assert!((g0 - g1).abs() < 1e-10 && g0 >= -1e-10);
        }
    }
}

fn random_problem(rng: &mut vmg_core::game_core::RunRng, d: usize, tuples: usize) -> (FeatureTable, MatrixDataset, Vec<f64>) {
    let model = random_payoff_model(4, 3, d, rng).unwrap();
    let mut data = MatrixDataset::new(&model.features);
    for _ in 0..tuples {
        let (i, j) = (rng.random_range(0..4), rng.random_range(0..3));
        data.push(&model.features, i, j, rng.random_range(-1.0..1.0)).unwrap();
    }
    let omega: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    (model.features, data, omega)
}

#[test]
fn objective_two_path_agreement() {
    let mut rng = seeded_rng(13);
    for beta in [0.1, 1.0] {
        for _ in 0..10 {
            let (features, data, omega) = random_problem(&mut rng, 4, 6);
            let spec = RegGameSpec::new(beta, random_simplex(&mut rng, 4), random_simplex(&mut rng, 3)).unwrap();
            let (mu, nu) = (random_simplex(&mut rng, 4), random_simplex(&mut rng, 3));
            let alpha = 0.7;
            let got = model_objective(&features, &omega, &data, &mu, &nu, &spec, alpha).unwrap();
            let a = features.payoff_matrix(&omega);
            let sq: f64 = data.tuples().iter().map(|&(i, j, v)| (a.get(i, j) - v).powi(2)).sum();
            let br_mu = best_response_max(&a, &nu, &spec).unwrap();
            let br_nu = best_response_min(&a, &mu, &spec).unwrap();
            let composed = sq - alpha * reg_game_value(&a, &br_mu, &nu, &spec).unwrap()
                + alpha * reg_game_value(&a, &mu, &br_nu, &spec).unwrap();
            assert!((got - composed).abs() < 1e-10, "{got} vs {composed}");
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = seeded_rng(17);
    for k in 0..100 {
        let beta = if k % 2 == 0 { 0.5 } else { 0.1 + rng.random::<f64>() * 2.0 };
        let (features, data, omega) = random_problem(&mut rng, 4, 5);
        let spec = RegGameSpec::new(beta, random_simplex(&mut rng, 4), random_simplex(&mut rng, 3)).unwrap();
        let (mu, nu) = (random_simplex(&mut rng, 4), random_simplex(&mut rng, 3));
        let alpha = rng.random_range(0.0..3.0);
        let analytic = model_objective_grad(&features, &omega, &data, &mu, &nu, &spec, alpha).unwrap();
        let numeric =
            finite_diff_grad(|w| model_objective(&features, w, &data, &mu, &nu, &spec, alpha), &omega, 1e-5).unwrap();
        assert!(rel_err(&analytic, &numeric) <= 1e-5, "instance {k}: {analytic:?} vs {numeric:?}");
    }
}

#[test]
fn single_tuple_gradient_is_the_chain_rule() {
    let mut rng = seeded_rng(5);
    let (features, _, omega) = random_problem(&mut rng, 3, 0);
    let mut data = MatrixDataset::new(&features);
    data.push(&features, 2, 1, 0.25).unwrap();
    let spec = RegGameSpec::uniform(1.0, 4, 3).unwrap();
    let g = model_objective_grad(&features, &omega, &data, &Simplex::uniform(4), &Simplex::uniform(3), &spec, 0.0).unwrap();
    let phi = features.feature(2, 1);
    let r = dot(phi, &omega) - 0.25;
    for k in 0..3 {
        assert!((g[k] - 2.0 * r * phi[k]).abs() < 1e-14);
    }
}

#[test]
fn least_squares_update_recovers_the_truth() {
    let mut rng = seeded_rng(30);
    let model = random_payoff_model(4, 4, 3, &mut rng).unwrap();
    let mut data = MatrixDataset::new(&model.features);
    for i in 0..4 {
        for j in 0..4 {
            data.push(&model.features, i, j, model.features.entry(&model.omega, i, j).unwrap()).unwrap();
        }
    }
    let spec = RegGameSpec::uniform(0.5, 4, 4).unwrap();
    let opt = ModelOptSettings { max_iters: 20_000, grad_tol: 1e-12, ..Default::default() };
    let (mu, nu) = (Simplex::uniform(4), Simplex::uniform(4));
    let up = update_model(&model.features, &[0.0; 3], &data, &mu, &nu, &spec, 0.0, &opt).unwrap();
    for k in 0..3 {
        assert!((up.omega[k] - model.omega[k]).abs() < 1e-6, "{:?} vs {:?}", up.omega, model.omega);
    }
}

#[test]
fn noiseless_one_hot_game_reaches_small_gap() {
    let features = FeatureTable::one_hot(3, 3);
    let mut rng = seeded_rng(2);
    let omega: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
    let model = LinearPayoffModel::new(features, omega, 3.0).unwrap();
    let oracle = NoiseOracle::new(model.clone(), 0.0, NoiseKind::Gaussian).unwrap();
    let spec = RegGameSpec::uniform(0.0, 3, 3).unwrap();
    let cfg = MatrixVmgConfig::new(3, 3, 9, spec.clone(), AlphaSchedule::PaperFormula { delta: 0.05 }, 200, 1);
    let run = run_vmg_matrix_detailed(&cfg, &oracle).unwrap();
    let best = run.trace.min_gap().unwrap();
    assert!(best <= 1e-3, "min gap {best}");
    let t = run.trace.gaps.iter().position(|&g| g == best).unwrap();
    let a = model.payoff_matrix();
    let lp = exact_ne_lp(&rows(&a)).unwrap();
    let r = &run.rounds[t];
    assert!((a.bilinear(r.mu_t.as_slice(), r.nu_t.as_slice()) - lp.value).abs() <= best + 1e-6);
}

/// Rock-paper-scissors expressed through one antisymmetric feature per unordered pair.
fn rps_model() -> LinearPayoffModel {
    let mut data = vec![0.0; 27];
    for (k, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
        data[(i * 3 + j) * 3 + k] = 1.0;
        data[(j * 3 + i) * 3 + k] = -1.0;
    }
    LinearPayoffModel::new(FeatureTable::new(3, 3, 3, data).unwrap(), vec![-1.0; 3], 3f64.sqrt()).unwrap()
}

#[test]
fn symmetric_rock_paper_scissors_converges_to_uniform() {
    let model = rps_model();
    let a = model.payoff_matrix();
    assert_eq!(rows(&a), vec![vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 1.0, 0.0]]);
    let oracle = NoiseOracle::new(model, 0.1, NoiseKind::Gaussian).unwrap();
    let spec = RegGameSpec::uniform(0.1, 3, 3).unwrap();
    let cfg = MatrixVmgConfig::new(3, 3, 3, spec, AlphaSchedule::PaperFormula { delta: 0.05 }, 2000, 4);
    let run = run_vmg_symmetric_detailed(&cfg, &oracle).unwrap();
    assert_eq!(run.trace.len(), 2000);
    assert_eq!(run.dataset.len(), 2000);
    let last = run.trace.gaps.last().unwrap();
    assert!(*last <= 0.05, "final gap {last}");
    let lp = exact_ne_lp(&rows(&a)).unwrap();
    let mu = run.rounds.last().unwrap().mu_t.as_slice();
    assert!(mu.iter().zip(&lp.mu).all(|(p, q)| (p - q).abs() < 0.05), "{mu:?}");
}

#[test]
fn antisymmetric_features_give_antisymmetric_payoffs() {
    let mut rng = seeded_rng(6);
    let model = vmg_core::game_core::random_antisymmetric_model(5, 3, &mut rng).unwrap();
    for _ in 0..20 {
        let omega: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = model.features.payoff_matrix(&omega);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(a.get(i, j) + a.get(j, i), 0.0);
            }
        }
    }
}
