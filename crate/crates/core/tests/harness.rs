use std::path::Path;

use vmg_core::game_core::seeded_rng;
use vmg_core::harness::{
    baseline_greedy_mle, fit_regret_slope, generate_env, greedy_config, load_trace_csv, run_cell, run_config_at,
    run_experiment, validate_summary, EnvDocument, EnvKind, ExperimentConfig, EXIT_OK,
};
use vmg_core::AlphaSchedule;

const MATRIX: &str = r#"{
    "instance": {"kind": "matrix", "m": 3, "n": 3, "d": 2, "sigma": 0.1, "instance_seed": 4},
    "algorithm": {"alpha_schedule": {"kind": "paper_formula", "delta": 0.05}, "rounds": ROUNDS, "beta": 0.5},
    "seeds": [7, 7, 8],
    "output_dir": "out"
}"#;

fn matrix(rounds: usize) -> ExperimentConfig {
    ExperimentConfig::from_json(&MATRIX.replace("ROUNDS", &rounds.to_string())).unwrap()
}

#[test]
fn single_round_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_config_at(&matrix(1), dir.path()).unwrap();
    assert_eq!(outcome.exit_code, EXIT_OK);
    let text = std::fs::read_to_string(dir.path().join("out/seed_8.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "round,gap,cum_regret,wallclock_ms");
    assert!(lines[1].starts_with("1,"));
}

#[test]
fn repeated_seeds_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config = matrix(30);
    run_config_at(&config, a.path()).unwrap();
    run_config_at(&config, b.path()).unwrap();
    for seed in [7, 8] {
        let name = format!("out/seed_{seed}.csv");
        assert_eq!(std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap());
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("out/summary.json")).unwrap()).unwrap();
    let summary = validate_summary(&summary).unwrap();
    assert_eq!(summary.runs.len(), 3);
    assert_eq!(summary.runs[0], summary.runs[1]);
    let trace = load_trace_csv(&a.path().join("out/seed_8.csv")).unwrap();
    assert_eq!(trace.gaps, run_cell(&config, 8).unwrap().gaps);
}

#[test]
fn hash_tracks_content_only() {
    let a = matrix(10);
    let b = ExperimentConfig::from_json(&a.to_json()).unwrap();
    assert_eq!(a.hash(), b.hash());
    let mut c = a.clone();
    c.seeds.push(9);
    assert_ne!(a.hash(), c.hash());
    let mut d = a.clone();
    d.algorithm.beta = 0.25;
    assert_ne!(a.hash(), d.hash());
    assert_ne!(a.hash(), greedy_config(&a).hash());
}

#[test]
fn greedy_baseline_is_the_zero_alpha_run() {
    let mut config = matrix(20);
    let greedy = baseline_greedy_mle(&config, 7).unwrap();
    config.algorithm.alpha_schedule = AlphaSchedule::Zero;
    let direct = run_cell(&config, 7).unwrap();
    assert_eq!(greedy.gaps, direct.gaps);
    assert_eq!(greedy.config_hash, direct.config_hash);
}

#[test]
fn saved_environment_paths_resolve_next_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let env = generate_env(EnvKind::MarkovFinite, &mut seeded_rng(1)).unwrap();
    EnvDocument::from_environment(&env, Some(1)).save(&dir.path().join("env.json")).unwrap();
    let config = r#"{
        "instance": {"kind": "markov_finite", "players": 2, "states": 4, "actions": 2, "horizon": 3, "d": 4, "env": "env.json"},
        "algorithm": {"alpha_schedule": {"kind": "constant", "value": 1.0}, "rounds": 60},
        "seeds": [1],
        "output_dir": "results"
    }"#;
    let path = dir.path().join("config.json");
    std::fs::write(&path, config).unwrap();
    let outcome = run_experiment(&path).unwrap();
    assert_eq!(outcome.exit_code, EXIT_OK);
    assert_eq!(outcome.summary_path, dir.path().join("results/summary.json"));
    let trace = load_trace_csv(&dir.path().join("results/seed_1.csv")).unwrap();
    assert_eq!(trace.len(), 60);
    assert!(fit_regret_slope(&trace).is_ok());
    assert!(run_experiment(Path::new("/nonexistent/config.json")).is_err());
}
