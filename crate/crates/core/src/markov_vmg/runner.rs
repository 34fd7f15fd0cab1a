use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::equilibrium::{equilibrium, EquilibriumMode};
use super::model::{
    best_response_policies, markov_model_update, markov_opt_default, FiniteModelProblem, TransitionDataset,
};
use crate::error::{check_len, Result, VmgError};
use crate::game_core::seeded_rng;
use crate::markov_env::{evaluate_values, nash_gap, sample_trajectory, FiniteMarkovGame, JointPolicy};
use crate::matrix_vmg::ModelOptSettings;
use crate::schedule::{AlphaContext, AlphaSchedule};
use crate::trace::{elapsed_ms, RegretTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovVmgConfig {
    pub alpha_schedule: AlphaSchedule,
    pub rounds: usize,
    pub beta: f64,
    pub mode: EquilibriumMode,
    pub solver_tol: f64,
    pub model_opt: ModelOptSettings,
    pub seed: u64,
    /// Starting kernel weights; uniform when absent.
    pub theta0: Option<Vec<Vec<f64>>>,
    pub record_wallclock: bool,
}

impl MarkovVmgConfig {
    pub fn new(alpha_schedule: AlphaSchedule, rounds: usize, beta: f64, mode: EquilibriumMode, seed: u64) -> Self {
        Self {
            alpha_schedule,
            rounds,
            beta,
            mode,
            solver_tol: 1e-8,
            model_opt: markov_opt_default(),
            seed,
            theta0: None,
            record_wallclock: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(VmgError::ConfigInvalid("rounds must be >= 1".into()));
        }
        if !(self.solver_tol > 0.0) {
            return Err(VmgError::ConfigInvalid("solver_tol must be > 0".into()));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(VmgError::ConfigInvalid(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if self.mode == EquilibriumMode::GeneralCce && self.beta != 0.0 {
            return Err(VmgError::ConfigInvalid("general_cce requires beta = 0".into()));
        }
        self.alpha_schedule.validate()?;
        self.model_opt.validate()
    }
}

/// Starting weights: `theta0` if given, else uniform on every step.
pub(crate) fn initial_theta(theta0: &Option<Vec<Vec<f64>>>, blocks: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    match theta0 {
        Some(t) => {
            check_len(blocks, t.len())?;
            for b in t {
                check_len(d, b.len())?;
            }
            t.iter().map(|b| crate::game_core::project_simplex_into(b)).collect()
        }
        None => Ok(vec![vec![1.0 / d as f64; d]; blocks]),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovRun {
    pub trace: RegretTrace,
    pub dataset: TransitionDataset,
    pub theta: Vec<Vec<f64>>,
    pub last_policy: Option<JointPolicy>,
}

pub fn run_vmg_markov(config: &MarkovVmgConfig, game: &FiniteMarkovGame) -> Result<RegretTrace> {
    Ok(run_vmg_markov_detailed(config, game)?.trace)
}

pub fn run_vmg_markov_detailed(config: &MarkovVmgConfig, game: &FiniteMarkovGame) -> Result<MarkovRun> {
    config.validate()?;
    if config.mode == EquilibriumMode::ZeroSumNe && !game.rewards.is_constant_sum() {
        return Err(VmgError::ConfigInvalid("zero_sum_ne needs two players with r^2 = 1 - r^1".into()));
    }
    let (hz, ns, np) = (game.horizon(), game.states(), game.players());
    let alpha = config.alpha_schedule.value(AlphaContext::Episodic {
        rounds: config.rounds,
        dim: game.d(),
        horizon: hz,
        players: np,
        states: ns,
    })?;
    let features = &game.kernel.features;
    let mut theta = initial_theta(&config.theta0, hz, game.d())?;
    let mut data = TransitionDataset::new(hz, ns, game.space.size());
    let mut trace = RegretTrace::new(config.seed);
    let mut rng = seeded_rng(config.seed);
    let mut last_policy = None;
    let tol = config.solver_tol;

    let outcome = (|| -> Result<()> {
        for _ in 0..config.rounds {
            let clock = config.record_wallclock.then(Instant::now);
            let p_prev = game.kernel.with_theta(theta.clone())?.table();
            let eq = equilibrium(&p_prev, &game.rewards, config.beta, &game.pi_ref, &game.space, config.mode, tol)?;
            let pi = eq.policy;
            let gap = nash_gap(game, &pi, config.beta)?;

            let problem =
                FiniteModelProblem::markov(features, &data, &pi, alpha, &game.rho, config.beta, &game.rewards, &game.pi_ref);
            let upd = markov_model_update(&problem, &theta, &config.model_opt)?;
            if !upd.converged {
                trace.diagnostics.model_nonconverged += 1;
            }
            theta = upd.theta;

            let p_t = game.kernel.with_theta(theta.clone())?.table();
            let brs = best_response_policies(&p_t, &pi, config.beta, &game.pi_ref, &game.rewards)?;

            let on = evaluate_values(&p_prev, &pi, config.beta, &game.pi_ref, &game.rewards)?;
            let mut excess = f64::NEG_INFINITY;
            let mut deviations = Vec::with_capacity(np);
            for (n, br) in brs.iter().enumerate() {
                let dev = pi.deviate(n, &br.policy)?;
                let v_dev = evaluate_values(&p_prev, &dev, config.beta, &game.pi_ref, &game.rewards)?;
                excess = excess.max(v_dev.value_at(&game.rho, n) - on.value_at(&game.rho, n));
                deviations.push(dev);
            }
            trace.diagnostics.record_sandwich(excess - 2.0 * tol);

            data.extend(&sample_trajectory(game, &pi, &mut rng)?)?;
            for dev in &deviations {
                data.extend(&sample_trajectory(game, dev, &mut rng)?)?;
            }
            last_policy = Some(pi);
            trace.push(gap, elapsed_ms(clock));
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        log::warn!("markov run (seed {}) stopped after {} rounds: {e}", config.seed, trace.len());
        trace.error = Some(e.to_string());
    }
    Ok(MarkovRun { trace, dataset: data, theta, last_policy })
}
