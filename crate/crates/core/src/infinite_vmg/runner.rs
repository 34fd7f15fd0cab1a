use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::eval::{discounted_best_response, discounted_equilibrium, discounted_nash_gap, discounted_values};
use super::game::{sampler, DiscountedMarkovGame};
use super::model::{discounted_model_update, DiscountedModelProblem};
use crate::error::{Result, VmgError};
use crate::game_core::seeded_rng;
use crate::markov_env::{
    best_response_dp, nash_gap_under, sample_trajectory, FiniteMarkovGame, JointPolicy, Transition,
};
use crate::markov_vmg::{
    initial_theta, markov_model_update, markov_opt_default, EquilibriumMode, FiniteModelProblem, MarkovVmgConfig,
    TransitionDataset, ValueTerm,
};
use crate::matrix_vmg::ModelOptSettings;
use crate::schedule::{AlphaContext, AlphaSchedule};
use crate::trace::{elapsed_ms, RegretTrace};

/// Outcome of an infinite-horizon or MDP run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedRun {
    pub trace: RegretTrace,
    pub dataset: TransitionDataset,
    pub theta: Vec<Vec<f64>>,
    pub last_policy: Option<JointPolicy>,
}

fn triple(t: super::game::SampleTriple) -> Transition {
    Transition { h: 0, s: t.s, a: t.a, s_next: t.s_next }
}

pub fn run_vmg_infinite(config: &MarkovVmgConfig, game: &DiscountedMarkovGame) -> Result<RegretTrace> {
    Ok(run_vmg_infinite_detailed(config, game)?.trace)
}

pub fn run_vmg_infinite_detailed(config: &MarkovVmgConfig, game: &DiscountedMarkovGame) -> Result<DiscountedRun> {
    config.validate()?;
    if config.mode == EquilibriumMode::ZeroSumNe && !game.rewards.is_constant_sum() {
        return Err(VmgError::ConfigInvalid("zero_sum_ne needs two players with r^2 = 1 - r^1".into()));
    }
    let (ns, np, gamma) = (game.states(), game.players(), game.gamma);
    let alpha = config.alpha_schedule.value(AlphaContext::Discounted {
        rounds: config.rounds,
        dim: game.d(),
        players: np,
        states: ns,
        gamma,
    })?;
    let features = &game.kernel.features;
    let mut theta = initial_theta(&config.theta0, 1, game.d())?;
    let mut data = TransitionDataset::new(1, ns, game.space.size());
    let mut trace = RegretTrace::new(config.seed);
    let mut rng = seeded_rng(config.seed);
    let mut last_policy = None;
    let mut warm: Option<Vec<f64>> = None;
    let tol = config.solver_tol;

    let outcome = (|| -> Result<()> {
        for _ in 0..config.rounds {
            let clock = config.record_wallclock.then(Instant::now);
            let p_prev = game.kernel.with_theta(theta.clone())?.table();
            let eq = discounted_equilibrium(
                &p_prev,
                &game.rewards,
                config.beta,
                &game.pi_ref,
                &game.space,
                config.mode,
                gamma,
                tol,
                warm.as_deref(),
            )?;
            if !eq.converged {
                trace.diagnostics.equilibrium_nonconverged += 1;
            }
            warm = Some(eq.values);
            let pi = eq.policy;
            let gap = discounted_nash_gap(game, &pi, config.beta)?;

            let problem = DiscountedModelProblem::markov(
                features,
                &data,
                &pi,
                alpha,
                &game.rho,
                config.beta,
                gamma,
                &game.rewards,
                &game.pi_ref,
            );
            let upd = discounted_model_update(&problem, &theta, &config.model_opt)?;
            if !upd.converged {
                trace.diagnostics.model_nonconverged += 1;
            }
            theta = upd.theta;

            let p_t = game.kernel.with_theta(theta.clone())?.table();
            let on = discounted_values(&p_prev, &pi, config.beta, &game.pi_ref, &game.rewards, gamma)?;
            let mut excess = f64::NEG_INFINITY;
            let mut deviations = Vec::with_capacity(np);
            for n in 0..np {
                let br = discounted_best_response(&p_t, &pi, n, config.beta, gamma, &game.pi_ref, &game.rewards)?;
                let dev = pi.deviate(n, &br.policy)?;
                let v_dev = discounted_values(&p_prev, &dev, config.beta, &game.pi_ref, &game.rewards, gamma)?;
                excess = excess.max(v_dev.value_at(&game.rho, n) - on.value_at(&game.rho, n));
                deviations.push(dev);
            }
            trace.diagnostics.record_sandwich(excess - 2.0 * tol);

            data.push(triple(sampler(game, &pi, &game.rho, &mut rng)?))?;
            for dev in &deviations {
                data.push(triple(sampler(game, dev, &game.rho, &mut rng)?))?;
            }
            last_policy = Some(pi);
            trace.push(gap, elapsed_ms(clock));
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        log::warn!("infinite-horizon run (seed {}) stopped after {} rounds: {e}", config.seed, trace.len());
        trace.error = Some(e.to_string());
    }
    Ok(DiscountedRun { trace, dataset: data, theta, last_policy })
}

/// Regularizer of the single-agent reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MdpOption {
    /// `-alpha V*_f(rho)`
    #[serde(rename = "I", alias = "i")]
    I,
    /// `-alpha V*_f(rho) + alpha V^{pi_t}_f(rho)`
    #[serde(rename = "II", alias = "ii")]
    II,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpConfig {
    pub alpha_schedule: AlphaSchedule,
    pub rounds: usize,
    pub beta: f64,
    pub option: MdpOption,
    pub model_opt: ModelOptSettings,
    pub seed: u64,
    pub theta0: Option<Vec<Vec<f64>>>,
    pub record_wallclock: bool,
}

impl MdpConfig {
    pub fn new(alpha_schedule: AlphaSchedule, rounds: usize, beta: f64, option: MdpOption, seed: u64) -> Self {
        Self {
            alpha_schedule,
            rounds,
            beta,
            option,
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
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(VmgError::ConfigInvalid(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        self.alpha_schedule.validate()?;
        self.model_opt.validate()
    }

    fn terms(&self, alpha: f64) -> Vec<(f64, ValueTerm)> {
        if alpha == 0.0 {
            return Vec::new();
        }
        match self.option {
            MdpOption::I => vec![(-alpha, ValueTerm::BestResponse(0))],
            MdpOption::II => vec![(-alpha, ValueTerm::BestResponse(0)), (alpha, ValueTerm::OnPolicy(0))],
        }
    }
}

/// A single-agent environment, episodic or discounted.
#[derive(Debug, Clone, Copy)]
pub enum MdpEnv<'a> {
    Finite(&'a FiniteMarkovGame),
    Discounted(&'a DiscountedMarkovGame),
}

impl MdpEnv<'_> {
    fn players(&self) -> usize {
        match self {
            MdpEnv::Finite(g) => g.players(),
            MdpEnv::Discounted(g) => g.players(),
        }
    }
}

pub fn run_vmg_mdp(config: &MdpConfig, env: MdpEnv) -> Result<RegretTrace> {
    Ok(run_vmg_mdp_detailed(config, env)?.trace)
}

/// Optimal policy under the current model, the true sub-optimality, one
/// trajectory, then the model update on the grown dataset.
pub fn run_vmg_mdp_detailed(config: &MdpConfig, env: MdpEnv) -> Result<DiscountedRun> {
    config.validate()?;
    if env.players() != 1 {
        return Err(VmgError::ConfigInvalid(format!("the MDP reduction needs one player, got {}", env.players())));
    }
    let (blocks, ns, na, d, alpha) = match env {
        MdpEnv::Finite(g) => {
            let ctx = AlphaContext::Episodic {
                rounds: config.rounds,
                dim: g.d(),
                horizon: g.horizon(),
                players: 1,
                states: g.states(),
            };
            (g.horizon(), g.states(), g.space.size(), g.d(), config.alpha_schedule.value(ctx)?)
        }
        MdpEnv::Discounted(g) => {
            let ctx = AlphaContext::Discounted {
                rounds: config.rounds,
                dim: g.d(),
                players: 1,
                states: g.states(),
                gamma: g.gamma,
            };
            (1, g.states(), g.space.size(), g.d(), config.alpha_schedule.value(ctx)?)
        }
    };
    let terms = config.terms(alpha);
    let mut theta = initial_theta(&config.theta0, blocks, d)?;
    let mut data = TransitionDataset::new(blocks, ns, na);
    let mut trace = RegretTrace::new(config.seed);
    let mut rng = seeded_rng(config.seed);
    let mut last_policy = None;
    let beta = config.beta;

    let outcome = (|| -> Result<()> {
        for _ in 0..config.rounds {
            let clock = config.record_wallclock.then(Instant::now);
            let upd = match env {
                MdpEnv::Finite(g) => {
                    let p_prev = g.kernel.with_theta(theta.clone())?.table();
                    let base = JointPolicy::uniform(blocks, ns, &g.space);
                    let br = best_response_dp(&p_prev, &base, 0, beta, &g.pi_ref, &g.rewards)?;
                    let pi = JointPolicy::from_product(&g.space, std::slice::from_ref(&br.policy))?;
                    let gap = nash_gap_under(g.table(), &g.rewards, &g.rho, &g.pi_ref, &pi, beta)?.gap;
                    data.extend(&sample_trajectory(g, &pi, &mut rng)?)?;
                    let problem = FiniteModelProblem {
                        features: &g.kernel.features,
                        data: &data,
                        policy: &pi,
                        rho: &g.rho,
                        beta,
                        rewards: &g.rewards,
                        pi_ref: &g.pi_ref,
                        terms: terms.clone(),
                    };
                    let upd = markov_model_update(&problem, &theta, &config.model_opt)?;
                    trace.push(gap, elapsed_ms(clock));
                    last_policy = Some(pi);
                    upd
                }
                MdpEnv::Discounted(g) => {
                    let p_prev = g.kernel.with_theta(theta.clone())?.table();
                    let base = JointPolicy::uniform(1, ns, &g.space);
                    let br = discounted_best_response(&p_prev, &base, 0, beta, g.gamma, &g.pi_ref, &g.rewards)?;
                    let pi = JointPolicy::from_product(&g.space, std::slice::from_ref(&br.policy))?;
                    let gap = discounted_nash_gap(g, &pi, beta)?;
                    data.push(triple(sampler(g, &pi, &g.rho, &mut rng)?))?;
                    let problem = DiscountedModelProblem {
                        features: &g.kernel.features,
                        data: &data,
                        policy: &pi,
                        rho: &g.rho,
                        beta,
                        gamma: g.gamma,
                        rewards: &g.rewards,
                        pi_ref: &g.pi_ref,
                        terms: terms.clone(),
                    };
                    let upd = discounted_model_update(&problem, &theta, &config.model_opt)?;
                    trace.push(gap, elapsed_ms(clock));
                    last_policy = Some(pi);
                    upd
                }
            };
            if !upd.converged {
                trace.diagnostics.model_nonconverged += 1;
            }
            theta = upd.theta;
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        log::warn!("MDP run (seed {}) stopped after {} rounds: {e}", config.seed, trace.len());
        trace.error = Some(e.to_string());
    }
    Ok(DiscountedRun { trace, dataset: data, theta, last_policy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infinite_vmg::{generate_discounted_game, DiscountedGenParams};

    #[test]
    fn one_round_collects_n_plus_one_triples() {
        let params = DiscountedGenParams { players: 2, states: 3, actions: 2, d: 2, gamma: 0.8, zero_sum: false };
        let game = generate_discounted_game(&params, &mut seeded_rng(2)).unwrap();
        let cfg = MarkovVmgConfig::new(AlphaSchedule::Constant { value: 1.0 }, 1, 0.0, EquilibriumMode::GeneralCce, 5);
        let run = run_vmg_infinite_detailed(&cfg, &game).unwrap();
        assert_eq!(run.dataset.len(), 3);
        let cfg3 = MarkovVmgConfig { rounds: 3, ..cfg };
        assert_eq!(run_vmg_infinite(&cfg3, &game).unwrap(), run_vmg_infinite(&cfg3, &game).unwrap());
    }

    #[test]
    fn mdp_rejects_two_players() {
        let params = DiscountedGenParams { players: 2, states: 2, actions: 2, d: 2, gamma: 0.5, zero_sum: false };
        let game = generate_discounted_game(&params, &mut seeded_rng(0)).unwrap();
        let cfg = MdpConfig::new(AlphaSchedule::Zero, 2, 0.0, MdpOption::I, 0);
        assert!(run_vmg_mdp(&cfg, MdpEnv::Discounted(&game)).is_err());
    }
}
