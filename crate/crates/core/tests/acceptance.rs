//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::time::Instant;

use common::{random_joint_policy, random_matrix, random_product_policy, random_simplex, rel_err, tv};
use rand::Rng;
use vmg_core::game_core::{
    random_payoff_model, seeded_rng, FeatureTable, LinearPayoffModel, MatrixDataset, NoiseKind, NoiseOracle,
    RegGameSpec, RunRng,
};
use vmg_core::harness::{fit_regret_slope, run_config_at, ExperimentConfig};
use vmg_core::infinite_vmg::{discounted_visitation_exact, generate_discounted_game, sampler_traced, DiscountedGenParams};
use vmg_core::linalg::Matrix;
use vmg_core::markov_env::{best_response_dp, generate_finite_game, GameGenParams, JointPolicy};
use vmg_core::markov_vmg::{
    markov_model_grad, markov_model_objective, run_vmg_markov_detailed, EquilibriumMode, MarkovVmgConfig,
    TransitionDataset,
};
use vmg_core::matrix_vmg::{
    duality_gap, model_objective, model_objective_grad, run_vmg_bandit, run_vmg_matrix, solve_matrix_ne,
    MatrixVmgConfig,
};
use vmg_core::markov_env::sample_trajectory;
use vmg_core::oracle::{
    enumerate_deterministic_best_response_under, enumerated_nash_gap, exact_cce_lp, exact_ne_lp, finite_diff_grad,
    max_deviation_gain,
};
use vmg_core::par::par_map;
use vmg_core::{AlphaSchedule, RegretTrace, RunDiagnostics};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rows(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.rows()).map(|i| a.row(i).to_vec()).collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sandwich diagnostics gathered from the A1 and A4 runs for A7.
#[derive(Default)]
struct Sandwich {
    runs: usize,
    checks: usize,
    violations: usize,
    worst: f64,
}

impl Sandwich {
    fn add(&mut self, d: &RunDiagnostics) {
        self.worst = if self.runs == 0 { d.worst_sandwich_excess } else { self.worst.max(d.worst_sandwich_excess) };
        self.runs += 1;
        self.checks += d.sandwich_checks;
        self.violations += d.sandwich_violations;
    }
}

fn a1(sandwich: &mut Sandwich) -> Verdict {
    let cells: Vec<(u64, u64)> = (0..10u64).flat_map(|inst| (0..3u64).map(move |s| (inst, s))).collect();
    let traces: Vec<RegretTrace> = par_map(&cells, |&(inst, seed)| {
        let model = random_payoff_model(10, 10, 5, &mut seeded_rng(500 + inst)).unwrap();
        let oracle = NoiseOracle::new(model, 0.1, NoiseKind::Gaussian).unwrap();
        let spec = RegGameSpec::uniform(0.5, 10, 10).unwrap();
        let config =
            MatrixVmgConfig::new(10, 10, 5, spec, AlphaSchedule::PaperFormula { delta: 0.05 }, 2000, seed);
        run_vmg_matrix(&config, &oracle).unwrap()
    });
    let mut good = 0;
    let mut worst = f64::NEG_INFINITY;
    for inst in 0..10 {
        let mut slopes = Vec::new();
        for trace in &traces[inst * 3..inst * 3 + 3] {
            sandwich.add(&trace.diagnostics);
            assert!(trace.error.is_none());
            slopes.push(fit_regret_slope(trace).map_or(f64::INFINITY, |f| f.slope));
        }
        let slope = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(slope);
        if slope <= 0.75 {
            good += 1;
        }
    }
    verdict(good >= 9, format!("{good}/10 instances with every seed's slope <= 0.75 (largest {worst:.3})"))
}

fn a2() -> Verdict {
    let mut rng = seeded_rng(2024);
    let (mut worst_value, mut worst_gap) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let (m, n) = (rng.random_range(2..=10), rng.random_range(2..=10));
        let a = random_matrix(&mut rng, m, n);
        let spec = RegGameSpec::uniform(0.0, m, n).unwrap();
        let (mu, nu) = solve_matrix_ne(&a, &spec, 1e-7).unwrap();
        let lp = exact_ne_lp(&rows(&a)).unwrap();
        worst_value = worst_value.max((a.bilinear(mu.as_slice(), nu.as_slice()) - lp.value).abs());
        worst_gap = worst_gap.max(duality_gap(&a, &mu, &nu, &spec).unwrap());
    }
    verdict(
        worst_value <= 1e-6 && worst_gap <= 1e-6,
        format!("50 matrices: max |value - LP| {worst_value:.1e}, max duality gap {worst_gap:.1e}"),
    )
}

fn matrix_problem(rng: &mut RunRng) -> (FeatureTable, MatrixDataset, Vec<f64>) {
    let model = random_payoff_model(4, 3, 5, rng).unwrap();
    let mut data = MatrixDataset::new(&model.features);
    for _ in 0..rng.random_range(0..8) {
        let (i, j) = (rng.random_range(0..4), rng.random_range(0..3));
        data.push(&model.features, i, j, rng.random_range(-1.0..1.0)).unwrap();
    }
    let omega = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    (model.features, data, omega)
}

fn lift(x: &[f64], blocks: usize, d: usize) -> Vec<Vec<f64>> {
    (0..blocks)
        .map(|b| {
            let mut t = x[b * (d - 1)..(b + 1) * (d - 1)].to_vec();
            t.push(1.0 - t.iter().sum::<f64>());
            t
        })
        .collect()
}

fn a3() -> Verdict {
    let mut rng = seeded_rng(33);
    let mut worst_matrix = 0.0f64;
    for k in 0..100 {
        let beta = if k % 2 == 0 { 0.1 } else { 1.0 };
        let (features, data, omega) = matrix_problem(&mut rng);
        let spec = RegGameSpec::new(beta, random_simplex(&mut rng, 4), random_simplex(&mut rng, 3)).unwrap();
        let (mu, nu) = (random_simplex(&mut rng, 4), random_simplex(&mut rng, 3));
        let alpha = rng.random_range(0.1..3.0);
        let analytic = model_objective_grad(&features, &omega, &data, &mu, &nu, &spec, alpha).unwrap();
        let numeric =
            finite_diff_grad(|w| model_objective(&features, w, &data, &mu, &nu, &spec, alpha), &omega, 1e-5).unwrap();
        worst_matrix = worst_matrix.max(rel_err(&analytic, &numeric));
    }
    let mut worst_markov = 0.0f64;
    for k in 0..100u64 {
        let beta = if k % 2 == 0 { 0.0 } else { 0.5 };
        let params = GameGenParams { players: 2, states: 3, actions: 2, horizon: 2, d: 3, zero_sum: false };
        let g = generate_finite_game(&params, &mut seeded_rng(3000 + k)).unwrap();
        let policy = random_product_policy(&mut rng, 2, 3, &g.space);
        let mut data = TransitionDataset::new(2, 3, g.space.size());
        for _ in 0..4 {
            data.extend(&sample_trajectory(&g, &policy, &mut rng).unwrap()).unwrap();
        }
        let theta: Vec<Vec<f64>> = (0..2).map(|_| random_simplex(&mut rng, 3).into_vec()).collect();
        let alpha = rng.random_range(0.1..3.0);
        let f = |x: &[f64]| {
            markov_model_objective(
                &g.kernel.features, &lift(x, 2, 3), &data, &policy, alpha, &g.rho, beta, &g.rewards, &g.pi_ref,
            )
        };
        let grad =
            markov_model_grad(&g.kernel.features, &theta, &data, &policy, alpha, &g.rho, beta, &g.rewards, &g.pi_ref)
                .unwrap();
        let x: Vec<f64> = theta.iter().flat_map(|t| t[..2].to_vec()).collect();
        let numeric = finite_diff_grad(f, &x, 1e-6).unwrap();
        let analytic: Vec<f64> = grad.iter().flat_map(|gb| vec![gb[0] - gb[2], gb[1] - gb[2]]).collect();
        worst_markov = worst_markov.max(rel_err(&analytic, &numeric));
    }
    verdict(
        worst_matrix <= 1e-4 && worst_markov <= 1e-4,
        format!("max relative error: matrix {worst_matrix:.1e}, Markov {worst_markov:.1e} (100 instances each)"),
    )
}

fn a4(sandwich: &mut Sandwich) -> Verdict {
    let params = GameGenParams { players: 2, states: 4, actions: 2, horizon: 3, d: 4, zero_sum: false };
    let seeds: Vec<u64> = (0..5).collect();
    let runs = par_map(&seeds, |&seed| {
        let game = generate_finite_game(&params, &mut seeded_rng(1000 + seed)).unwrap();
        let config = MarkovVmgConfig::new(
            AlphaSchedule::PaperFormula { delta: 0.05 },
            300,
            0.0,
            EquilibriumMode::GeneralCce,
            seed,
        );
        let run = run_vmg_markov_detailed(&config, &game).unwrap();
        let certified = enumerated_nash_gap(&game, run.last_policy.as_ref().unwrap()).unwrap();
        (run.trace, certified)
    });
    let mut pass = true;
    let mut notes = Vec::new();
    for (trace, certified) in &runs {
        sandwich.add(&trace.diagnostics);
        let g = &trace.gaps;
        let min = trace.min_gap().unwrap();
        let ratio = mean(&g[g.len() - 50..]) / mean(&g[..50]);
        let agrees = (certified - g[g.len() - 1]).abs() <= 1e-9;
        pass &= trace.error.is_none() && g.len() == 300 && min <= 0.05 * 3.0 && ratio <= 0.5 && agrees;
        notes.push(format!("min {min:.4} ratio {ratio:.2}"));
    }
    verdict(pass, format!("5 seeds [{}], final gaps match enumeration", notes.join("; ")))
}

fn a5() -> Verdict {
    let mut means = vec![0.1; 10];
    means[0] = 0.8;
    means[1] = 0.5;
    let mut omega0 = vec![0.0; 10];
    omega0[0] = -2.0;
    omega0[1] = 1.0;
    let model = LinearPayoffModel::new(FeatureTable::one_hot(10, 1), means, 10f64.sqrt()).unwrap();
    let oracle = NoiseOracle::new(model, 0.5, NoiseKind::Gaussian).unwrap();
    let spec = RegGameSpec::uniform(0.2, 10, 1).unwrap();
    let seeds: Vec<u64> = (0..20).collect();
    let tail = |alpha: AlphaSchedule, seed: u64| {
        let mut config = MatrixVmgConfig::new(10, 1, 10, spec.clone(), alpha, 3000, seed);
        config.omega0 = Some(omega0.clone());
        let g = run_vmg_bandit(&config, &oracle).unwrap().gaps;
        mean(&g[g.len() - 100..])
    };
    let pairs = par_map(&seeds, |&s| (tail(AlphaSchedule::PaperFormula { delta: 0.05 }, s), tail(AlphaSchedule::Zero, s)));
    let diffs: Vec<f64> = pairs.iter().map(|(v, g)| g - v).collect();
    let m = mean(&diffs);
    let sd = (diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64).sqrt();
    let se = sd / (diffs.len() as f64).sqrt();
    let vmg = mean(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let greedy = mean(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    verdict(
        vmg < greedy && m > 3.0 * se,
        format!("final-100 gap: VMG {vmg:.4}, greedy {greedy:.4}; paired difference {m:.4} = {:.1} SE", m / se),
    )
}

fn a6() -> Verdict {
    let params = DiscountedGenParams { players: 2, states: 3, actions: 2, d: 2, gamma: 0.9, zero_sum: false };
    let g = generate_discounted_game(&params, &mut seeded_rng(6)).unwrap();
    let policy = random_joint_policy(&mut seeded_rng(7), 1, 3, &g.space);
    let mut rng = seeded_rng(8);
    let calls = 100_000;
    let na = g.space.size();
    let mut freq = vec![0.0; 3 * na];
    let mut total_len = 0usize;
    for _ in 0..calls {
        let (t, len) = sampler_traced(g.table(), &policy, &g.rho, 0.9, &mut rng).unwrap();
        total_len += len;
        freq[t.s * na + t.a] += 1.0 / calls as f64;
    }
    let mean_len = total_len as f64 / calls as f64;
    let exact = discounted_visitation_exact(g.table(), &policy, &g.rho, 0.9).unwrap();
    let dist = tv(&freq, exact.as_slice());
    verdict(
        (mean_len - 10.0).abs() <= 0.15 && dist <= 0.02,
        format!("mean length {mean_len:.3}, TV to exact visitation {dist:.4}"),
    )
}

fn a7(sandwich: &Sandwich) -> Verdict {
    verdict(
        sandwich.checks > 0 && sandwich.violations == 0,
        format!(
            "{} rounds over {} runs, {} violations, worst excess over 2*tol {:.1e}",
            sandwich.checks, sandwich.runs, sandwich.violations, sandwich.worst
        ),
    )
}

fn a8() -> Verdict {
    let mut rng = seeded_rng(88);
    let mut instances = 0;
    let mut worst = 0.0f64;
    // (states, actions per player, horizon) with at most 16 deterministic policies per player
    let shapes = [(1, 2, 1), (1, 4, 1), (2, 2, 1), (2, 4, 1), (4, 2, 1), (1, 3, 2), (1, 4, 2), (2, 2, 2), (1, 2, 4)];
    for &(states, actions, horizon) in &shapes {
        for players in [1usize, 2] {
            for _ in 0..5 {
                let params = GameGenParams { players, states, actions, horizon, d: 1, zero_sum: false };
                let g = generate_finite_game(&params, &mut seeded_rng(rng.random())).unwrap();
                let policy: JointPolicy = random_joint_policy(&mut rng, horizon, states, &g.space);
                for n in 0..players {
                    let dp = best_response_dp(g.table(), &policy, n, 0.0, &g.pi_ref, &g.rewards).unwrap();
                    let brute = enumerate_deterministic_best_response_under(
                        g.table(), &g.rewards, g.rho.as_slice(), &policy, n,
                    )
                    .unwrap();
                    worst = worst.max((dp.value_at(&g.rho) - brute).abs());
                    instances += 1;
                }
            }
        }
    }
    let mut worst_cce = f64::NEG_INFINITY;
    for k in 0..50 {
        let players = 2 + k % 2;
        let sizes = vec![2; players];
        let total = 1 << players;
        let payoffs: Vec<Vec<f64>> = (0..players).map(|_| (0..total).map(|_| rng.random::<f64>()).collect()).collect();
        let x = exact_cce_lp(&sizes, &payoffs).unwrap();
        worst_cce = worst_cce.max(max_deviation_gain(&sizes, &payoffs, &x));
    }
    verdict(
        worst <= 1e-12 && worst_cce <= 1e-8,
        format!("{instances} best responses, max |DP - enumeration| {worst:.1e}; 50 CCEs, max deviation gain {worst_cce:.1e}"),
    )
}

fn a9() -> Verdict {
    let configs = [
        r#"{"instance": {"kind": "matrix", "m": 5, "n": 5, "d": 3, "instance_seed": 9},
            "algorithm": {"alpha_schedule": {"kind": "paper_formula", "delta": 0.05}, "rounds": 200, "beta": 0.5},
            "seeds": [1, 2, 3], "output_dir": "out"}"#,
        r#"{"instance": {"kind": "markov_finite", "players": 2, "states": 3, "actions": 2, "horizon": 2, "d": 3, "instance_seed": 9},
            "algorithm": {"alpha_schedule": {"kind": "paper_formula", "delta": 0.05}, "rounds": 60},
            "seeds": [1, 2], "output_dir": "out"}"#,
        r#"{"instance": {"kind": "markov_infinite", "players": 2, "states": 3, "actions": 2, "d": 2, "gamma": 0.8, "instance_seed": 9},
            "algorithm": {"alpha_schedule": {"kind": "paper_formula", "delta": 0.05}, "rounds": 40},
            "seeds": [1, 2], "output_dir": "out"}"#,
    ];
    let mut files = 0;
    let mut identical = true;
    for text in configs {
        let config = ExperimentConfig::from_json(text).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_config_at(&config, a.path()).unwrap();
        run_config_at(&config, b.path()).unwrap();
        for seed in &config.seeds {
            let name = format!("out/seed_{seed}.csv");
            identical &= std::fs::read(a.path().join(&name)).unwrap() == std::fs::read(b.path().join(&name)).unwrap();
            files += 1;
        }
    }
    verdict(identical, format!("{files} CSVs over 3 experiment kinds rerun byte-identical"))
}

fn main() {
    let mut sandwich = Sandwich::default();
    let mut failed = 0;
    let mut report = |name: &str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("{name} {status}  {} [{:.1}s]", v.detail, start.elapsed().as_secs_f64());
        if !v.pass {
            failed += 1;
        }
    };
    report("A1", &mut || a1(&mut sandwich));
    report("A2", &mut a2);
    report("A3", &mut a3);
    report("A4", &mut || a4(&mut sandwich));
    report("A5", &mut a5);
    report("A6", &mut a6);
    report("A7", &mut || a7(&sandwich));
    report("A8", &mut a8);
    report("A9", &mut a9);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
