use std::path::{Path, PathBuf};

use crate::error::{Result, VmgError};
use crate::game_core::{
    random_antisymmetric_model, random_payoff_model, seeded_rng, FeatureTable, LinearPayoffModel, NoiseOracle,
    RegGameSpec,
};
use crate::infinite_vmg::{
    generate_discounted_game, run_vmg_infinite, run_vmg_mdp, DiscountedGenParams, MdpConfig, MdpEnv,
};
use crate::markov_env::{generate_finite_game, GameGenParams};
use crate::markov_vmg::{run_vmg_markov, MarkovVmgConfig};
use crate::matrix_vmg::{run_vmg_bandit, run_vmg_matrix, run_vmg_symmetric, MatrixVmgConfig};
use crate::par::{par_map, threads_from_env, with_threads};
use crate::schedule::AlphaSchedule;
use crate::trace::RegretTrace;

use super::config::{ExperimentConfig, InstanceSpec};
use super::env_io::{EnvDocument, Environment};
use super::io::{save_trace_csv, ExperimentSummary, RunSummary, RUN_SCHEMA};
use rand::Rng;

/// Process exit codes of `vmg run`.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

fn load_env(path: &Path) -> Result<Environment> {
    EnvDocument::load(path)?.build()
}

fn wrong_env(kind: &str) -> VmgError {
    VmgError::ConfigInvalid(format!("environment file does not hold a {kind} environment"))
}

/// The ground truth of a config, generated or loaded.
pub fn build_environment(config: &ExperimentConfig) -> Result<Environment> {
    build_environment_at(config, Path::new("."))
}

/// As [`build_environment`], with a relative `env` path resolved against `base`.
pub fn build_environment_at(config: &ExperimentConfig, base: &Path) -> Result<Environment> {
    if let Some(path) = config.instance.env_path() {
        return load_env(&base.join(path));
    }
    Ok(match &config.instance {
        InstanceSpec::Matrix { m, n, d, instance_seed, .. } => {
            Environment::Matrix(random_payoff_model(*m, *n, *d, &mut seeded_rng(*instance_seed))?)
        }
        InstanceSpec::Symmetric { m, d, instance_seed, .. } => {
            Environment::Matrix(random_antisymmetric_model(*m, *d, &mut seeded_rng(*instance_seed))?)
        }
        InstanceSpec::Bandit { arms, means, instance_seed, .. } => {
            let means = match means {
                Some(v) => v.clone(),
                None => {
                    let mut rng = seeded_rng(*instance_seed);
                    (0..*arms).map(|_| rng.random::<f64>()).collect()
                }
            };
            let bound = (*arms as f64).sqrt();
            Environment::Matrix(LinearPayoffModel::new(FeatureTable::one_hot(*arms, 1), means, bound)?)
        }
        InstanceSpec::MarkovFinite { players, states, actions, horizon, d, zero_sum, instance_seed, .. } => {
            let p = GameGenParams {
                players: *players,
                states: *states,
                actions: *actions,
                horizon: *horizon,
                d: *d,
                zero_sum: *zero_sum,
            };
            Environment::Finite(generate_finite_game(&p, &mut seeded_rng(*instance_seed))?)
        }
        InstanceSpec::MarkovInfinite { players, states, actions, d, gamma, zero_sum, instance_seed, .. } => {
            let p = DiscountedGenParams {
                players: *players,
                states: *states,
                actions: *actions,
                d: *d,
                gamma: *gamma,
                zero_sum: *zero_sum,
            };
            Environment::Discounted(generate_discounted_game(&p, &mut seeded_rng(*instance_seed))?)
        }
        InstanceSpec::Mdp { states, actions, d, horizon, gamma, instance_seed, .. } => {
            let mut rng = seeded_rng(*instance_seed);
            match (horizon, gamma) {
                (Some(h), None) => {
                    let p = GameGenParams { players: 1, states: *states, actions: *actions, horizon: *h, d: *d, zero_sum: false };
                    Environment::Finite(generate_finite_game(&p, &mut rng)?)
                }
                (None, Some(g)) => {
                    let p = DiscountedGenParams { players: 1, states: *states, actions: *actions, d: *d, gamma: *g, zero_sum: false };
                    Environment::Discounted(generate_discounted_game(&p, &mut rng)?)
                }
                _ => return Err(VmgError::ConfigInvalid("mdp needs exactly one of horizon or gamma".into())),
            }
        }
    })
}

fn matrix_config(config: &ExperimentConfig, m: usize, n: usize, d: usize, seed: u64) -> Result<MatrixVmgConfig> {
    let a = &config.algorithm;
    let spec = RegGameSpec::uniform(a.beta, m, n)?;
    let mut c = MatrixVmgConfig::new(m, n, d, spec, a.alpha_schedule, a.rounds, seed);
    c.solver_tol = a.solver_tol;
    c.model_opt = config.model_opt();
    c.record_wallclock = a.record_wallclock;
    Ok(c)
}

fn markov_config(config: &ExperimentConfig, seed: u64) -> MarkovVmgConfig {
    let a = &config.algorithm;
    let mut c = MarkovVmgConfig::new(a.alpha_schedule, a.rounds, a.beta, config.mode(), seed);
    c.solver_tol = a.solver_tol;
    c.model_opt = config.model_opt();
    c.record_wallclock = a.record_wallclock;
    c
}

/// Runs one `(config, seed)` cell on a prepared environment.
pub fn run_on(config: &ExperimentConfig, env: &Environment, seed: u64) -> Result<RegretTrace> {
    let mut trace = match (&config.instance, env) {
        (InstanceSpec::Matrix { sigma, noise, .. }, Environment::Matrix(model)) => {
            let oracle = NoiseOracle::new(model.clone(), *sigma, *noise)?;
            run_vmg_matrix(&matrix_config(config, model.m(), model.n(), model.d(), seed)?, &oracle)?
        }
        (InstanceSpec::Symmetric { sigma, noise, .. }, Environment::Matrix(model)) => {
            let oracle = NoiseOracle::new(model.clone(), *sigma, *noise)?;
            run_vmg_symmetric(&matrix_config(config, model.m(), model.n(), model.d(), seed)?, &oracle)?
        }
        (InstanceSpec::Bandit { sigma, noise, omega0, .. }, Environment::Matrix(model)) => {
            let oracle = NoiseOracle::new(model.clone(), *sigma, *noise)?;
            let mut c = matrix_config(config, model.m(), 1, model.d(), seed)?;
            c.omega0 = omega0.clone();
            run_vmg_bandit(&c, &oracle)?
        }
        (InstanceSpec::MarkovFinite { .. }, Environment::Finite(game)) => run_vmg_markov(&markov_config(config, seed), game)?,
        (InstanceSpec::MarkovInfinite { .. }, Environment::Discounted(game)) => {
            run_vmg_infinite(&markov_config(config, seed), game)?
        }
        (InstanceSpec::Mdp { option, .. }, env) => {
            let a = &config.algorithm;
            let mut c = MdpConfig::new(a.alpha_schedule, a.rounds, a.beta, *option, seed);
            c.model_opt = config.model_opt();
            c.record_wallclock = a.record_wallclock;
            match env {
                Environment::Finite(g) => run_vmg_mdp(&c, MdpEnv::Finite(g))?,
                Environment::Discounted(g) => run_vmg_mdp(&c, MdpEnv::Discounted(g))?,
                Environment::Matrix(_) => return Err(wrong_env("Markov")),
            }
        }
        (spec, _) => return Err(wrong_env(spec.kind())),
    };
    trace.config_hash = config.hash();
    Ok(trace)
}

pub fn run_cell(config: &ExperimentConfig, seed: u64) -> Result<RegretTrace> {
    run_on(config, &build_environment(config)?, seed)
}

/// The same experiment with the value incentive switched off.
pub fn greedy_config(config: &ExperimentConfig) -> ExperimentConfig {
    let mut c = config.clone();
    c.algorithm.alpha_schedule = AlphaSchedule::Zero;
    c
}

/// Greedy maximum-likelihood ablation of one cell: identical pipeline, `alpha = 0`.
pub fn baseline_greedy_mle(config: &ExperimentConfig, seed: u64) -> Result<RegretTrace> {
    run_cell(&greedy_config(config), seed)
}

/// Paths and exit status of a finished experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub exit_code: i32,
    pub summary: ExperimentSummary,
    pub summary_path: PathBuf,
}

pub fn csv_name(seed: u64) -> String {
    format!("seed_{seed}.csv")
}

/// Runs every seed of `config`, writing one CSV per run and `summary.json` into the output directory.
pub fn run_config(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run_config_at(config, Path::new("."))
}

/// As [`run_config`], with relative paths in the config resolved against `base`.
pub fn run_config_at(config: &ExperimentConfig, base: &Path) -> Result<ExperimentOutcome> {
    config.validate()?;
    let out = &base.join(&config.output_dir);
    std::fs::create_dir_all(out)?;
    let env = build_environment_at(config, base)?;
    let threads = threads_from_env(config.threads);
    let results: Vec<(u64, Result<RegretTrace>)> =
        with_threads(threads, || par_map(&config.seeds, |&seed| (seed, run_on(config, &env, seed))));

    let mut runs = Vec::with_capacity(results.len());
    let mut failed = false;
    for (seed, result) in results {
        let trace = match result {
            Ok(t) => t,
            Err(e) => {
                log::warn!("seed {seed} failed: {e}");
                let mut t = RegretTrace::new(seed);
                t.config_hash = config.hash();
                t.error = Some(e.to_string());
                t
            }
        };
        failed |= trace.error.is_some();
        let name = csv_name(seed);
        save_trace_csv(&trace, &out.join(&name))?;
        runs.push(RunSummary::from_trace(&trace, name));
    }
    let summary = ExperimentSummary {
        schema: RUN_SCHEMA.into(),
        kind: config.instance.kind().into(),
        config_hash: config.hash(),
        rounds: config.algorithm.rounds,
        runs,
    };
    let summary_path = out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| VmgError::Io(e.to_string()))?;
    std::fs::write(&summary_path, text + "\n")?;
    Ok(ExperimentOutcome { exit_code: if failed { EXIT_PARTIAL } else { EXIT_OK }, summary, summary_path })
}

/// Loads and runs a config file. Relative paths inside it resolve against the file's directory.
pub fn run_experiment(config_path: &Path) -> Result<ExperimentOutcome> {
    let config = ExperimentConfig::load(config_path)?;
    run_config_at(&config, config_path.parent().unwrap_or_else(|| Path::new(".")))
}
