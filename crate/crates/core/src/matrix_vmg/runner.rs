//! Online loops: two-player, symmetric and bandit.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{update_model_with, ModelOptSettings, Regularizer};
use super::solver::{
    best_response_max, best_response_min, duality_gap, max_value, solve_matrix_ne_with, NeSolution,
    NeSolverSettings,
};
use crate::error::{check_len, Result, VmgError};
use crate::game_core::{
    noisy_query, reg_game_value, seeded_rng, FeatureTable, MatrixDataset, NoiseOracle, RegGameSpec, Simplex,
};
use crate::linalg::{sample_index, Matrix};
use crate::schedule::{AlphaContext, AlphaSchedule};
use crate::trace::{elapsed_ms, RegretTrace};

/// Antisymmetry tolerance for the symmetric variant.
pub const ANTISYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixVmgConfig {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub spec: RegGameSpec,
    pub alpha_schedule: AlphaSchedule,
    pub rounds: usize,
    pub solver_tol: f64,
    pub model_opt: ModelOptSettings,
    pub seed: u64,
    /// Starting parameter; zero when absent.
    pub omega0: Option<Vec<f64>>,
    pub record_wallclock: bool,
}

impl MatrixVmgConfig {
    pub fn new(m: usize, n: usize, d: usize, spec: RegGameSpec, alpha_schedule: AlphaSchedule, rounds: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            d,
            spec,
            alpha_schedule,
            rounds,
            solver_tol: 1e-8,
            model_opt: ModelOptSettings::default(),
            seed,
            omega0: None,
            record_wallclock: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(VmgError::ConfigInvalid("rounds must be >= 1".into()));
        }
        if !(self.solver_tol > 0.0) {
            return Err(VmgError::ConfigInvalid(format!("solver_tol must be > 0, got {}", self.solver_tol)));
        }
        check_len(self.m, self.spec.m())?;
        check_len(self.n, self.spec.n())?;
        self.alpha_schedule.validate()?;
        self.model_opt.validate()?;
        if let Some(w) = &self.omega0 {
            check_len(self.d, w.len())?;
        }
        Ok(())
    }

    pub fn alpha(&self) -> Result<f64> {
        self.alpha_schedule.value(AlphaContext::Matrix { rounds: self.rounds, dim: self.d })
    }
}

/// Iterates of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundState {
    pub omega_t: Vec<f64>,
    pub mu_t: Simplex,
    pub nu_t: Simplex,
    pub mu_tilde_t: Simplex,
    pub nu_tilde_t: Simplex,
    pub gap_t: f64,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRun {
    pub trace: RegretTrace,
    pub rounds: Vec<RoundState>,
    pub dataset: MatrixDataset,
    pub omega: Vec<f64>,
}

fn check_oracle(config: &MatrixVmgConfig, oracle: &NoiseOracle) -> Result<()> {
    config.validate()?;
    check_len(config.m, oracle.true_model.m())?;
    check_len(config.n, oracle.true_model.n())?;
    check_len(config.d, oracle.true_model.d())
}

struct Loop<'a> {
    config: &'a MatrixVmgConfig,
    features: &'a FeatureTable,
    oracle: &'a NoiseOracle,
    a_true: Matrix,
    alpha: f64,
    omega: Vec<f64>,
    data: MatrixDataset,
    trace: RegretTrace,
    states: Vec<RoundState>,
    ne: NeSolverSettings,
    warm: Option<NeSolution>,
}

impl<'a> Loop<'a> {
    fn new(config: &'a MatrixVmgConfig, oracle: &'a NoiseOracle) -> Result<Self> {
        check_oracle(config, oracle)?;
        let features = &oracle.true_model.features;
        let mut omega = config.omega0.clone().unwrap_or_else(|| vec![0.0; config.d]);
        crate::game_core::project_ball(&mut omega, (config.d as f64).sqrt());
        Ok(Self {
            config,
            features,
            oracle,
            a_true: oracle.true_payoff(),
            alpha: config.alpha()?,
            omega,
            data: MatrixDataset::new(features),
            trace: RegretTrace::new(config.seed),
            states: Vec::with_capacity(config.rounds),
            ne: NeSolverSettings::default(),
            warm: None,
        })
    }

    fn solve(&mut self, a: &Matrix, spec: &RegGameSpec) -> Result<NeSolution> {
        let warm = self.warm.as_ref().map(|w| (&w.mu, &w.nu));
        let sol = solve_matrix_ne_with(a, spec, self.config.solver_tol, warm, &self.ne)?;
        self.warm = Some(sol.clone());
        Ok(sol)
    }

    fn update(&mut self, reg: &Regularizer, spec: &RegGameSpec) -> Result<()> {
        let upd = update_model_with(self.features, &self.omega, &self.data, reg, spec, self.alpha, &self.config.model_opt)?;
        if !upd.converged {
            self.trace.diagnostics.model_nonconverged += 1;
        }
        self.omega = upd.omega;
        Ok(())
    }

    fn observe<R: Rng + ?Sized>(&mut self, i: usize, j: usize, rng: &mut R) -> Result<()> {
        let v = noisy_query(self.oracle, i, j, rng)?;
        self.data.push(self.features, i, j, v)
    }

    fn finish(mut self, outcome: Result<()>) -> MatrixRun {
        if let Err(e) = outcome {
            log::warn!("matrix run (seed {}) stopped after {} rounds: {e}", self.config.seed, self.trace.len());
            self.trace.error = Some(e.to_string());
        }
        self.trace.final_residual = Some(self.data.mean_residual(self.features, &self.omega));
        MatrixRun { trace: self.trace, rounds: self.states, dataset: self.data, omega: self.omega }
    }
}

/// Two-player value-incentivized loop with two samples per round.
pub fn run_vmg_matrix(config: &MatrixVmgConfig, oracle: &NoiseOracle) -> Result<RegretTrace> {
    Ok(run_vmg_matrix_detailed(config, oracle)?.trace)
}

pub fn run_vmg_matrix_detailed(config: &MatrixVmgConfig, oracle: &NoiseOracle) -> Result<MatrixRun> {
    let mut lp = Loop::new(config, oracle)?;
    let mut rng = seeded_rng(config.seed);
    let spec = &config.spec;
    let tol = config.solver_tol;
    let outcome = (|| -> Result<()> {
        for _ in 0..config.rounds {
            let clock = config.record_wallclock.then(Instant::now);
            let a_prev = lp.features.payoff_matrix(&lp.omega);
            let NeSolution { mu, nu, .. } = lp.solve(&a_prev, spec)?;
            let gap = duality_gap(&lp.a_true, &mu, &nu, spec)?;

            lp.update(&Regularizer::TwoSided { mu: &mu, nu: &nu }, spec)?;
            let a_t = lp.features.payoff_matrix(&lp.omega);
            let mu_tilde = best_response_max(&a_t, &nu, spec)?;
            let nu_tilde = best_response_min(&a_t, &mu, spec)?;

            let center = reg_game_value(&a_prev, &mu, &nu, spec)?;
            let low = reg_game_value(&a_prev, &mu_tilde, &nu, spec)? - center;
            let high = center - reg_game_value(&a_prev, &mu, &nu_tilde, spec)?;
            lp.trace.diagnostics.record_sandwich(low.max(high) - tol);

            let i = sample_index(mu_tilde.as_slice(), &mut rng);
            let j = sample_index(nu.as_slice(), &mut rng);
            lp.observe(i, j, &mut rng)?;
            let i2 = sample_index(mu.as_slice(), &mut rng);
            let j2 = sample_index(nu_tilde.as_slice(), &mut rng);
            lp.observe(i2, j2, &mut rng)?;

            lp.states.push(RoundState {
                omega_t: lp.omega.clone(),
                mu_t: mu,
                nu_t: nu,
                mu_tilde_t: mu_tilde,
                nu_tilde_t: nu_tilde,
                gap_t: gap,
            });
            lp.trace.push(gap, elapsed_ms(clock));
        }
        Ok(())
    })();
    Ok(lp.finish(outcome))
}

/// Symmetric variant: one shared policy and one sample per round.
pub fn run_vmg_symmetric(config: &MatrixVmgConfig, oracle: &NoiseOracle) -> Result<RegretTrace> {
    Ok(run_vmg_symmetric_detailed(config, oracle)?.trace)
}

pub fn run_vmg_symmetric_detailed(config: &MatrixVmgConfig, oracle: &NoiseOracle) -> Result<MatrixRun> {
    if config.m != config.n {
        return Err(VmgError::DimensionMismatch { expected: config.m, actual: config.n });
    }
    let defect = oracle.true_model.features.antisymmetry_defect();
    if defect > ANTISYMMETRY_TOL {
        return Err(VmgError::AsymmetricFeatures(defect));
    }
    if config.spec.mu_ref != config.spec.nu_ref {
        return Err(VmgError::InvalidModel("the symmetric game needs mu_ref = nu_ref".into()));
    }
    let mut lp = Loop::new(config, oracle)?;
    let mut rng = seeded_rng(config.seed);
    let spec = &config.spec;
    let tol = config.solver_tol;
    let outcome = (|| -> Result<()> {
        for _ in 0..config.rounds {
            let clock = config.record_wallclock.then(Instant::now);
            let a_prev = lp.features.payoff_matrix(&lp.omega);
            let sol = lp.solve(&a_prev, spec)?;
            let mu = symmetric_policy(&a_prev, &sol, spec, tol)?;
            if duality_gap(&a_prev, &mu, &mu, spec)? > tol {
                lp.trace.diagnostics.equilibrium_nonconverged += 1;
            }
            let gap = duality_gap(&lp.a_true, &mu, &mu, spec)?;

            lp.update(&Regularizer::MinPlayerOnly { mu: &mu }, spec)?;
            let a_t = lp.features.payoff_matrix(&lp.omega);
            let mu_tilde = best_response_max(&a_t, &mu, spec)?;

            let center = reg_game_value(&a_prev, &mu, &mu, spec)?;
            let low = reg_game_value(&a_prev, &mu_tilde, &mu, spec)? - center;
            lp.trace.diagnostics.record_sandwich(low - tol);

            let i = sample_index(mu_tilde.as_slice(), &mut rng);
            let j = sample_index(mu.as_slice(), &mut rng);
            lp.observe(i, j, &mut rng)?;

            let nu_tilde = best_response_min(&a_t, &mu, spec)?;
            lp.states.push(RoundState {
                omega_t: lp.omega.clone(),
                mu_t: mu.clone(),
                nu_t: mu,
                mu_tilde_t: mu_tilde,
                nu_tilde_t: nu_tilde,
                gap_t: gap,
            });
            lp.trace.push(gap, elapsed_ms(clock));
        }
        Ok(())
    })();
    Ok(lp.finish(outcome))
}

/// Picks whichever side of the solver output is the better symmetric equilibrium.
fn symmetric_policy(a: &Matrix, sol: &NeSolution, spec: &RegGameSpec, tol: f64) -> Result<Simplex> {
    let g_mu = duality_gap(a, &sol.mu, &sol.mu, spec)?;
    if g_mu <= tol {
        return Ok(sol.mu.clone());
    }
    let g_nu = duality_gap(a, &sol.nu, &sol.nu, spec)?;
    Ok(if g_nu < g_mu { sol.nu.clone() } else { sol.mu.clone() })
}

/// Bandit reduction (`n = 1`): softmax policy, one pull per round, and a
/// model update on the data including the current pull.
pub fn run_vmg_bandit(config: &MatrixVmgConfig, oracle: &NoiseOracle) -> Result<RegretTrace> {
    Ok(run_vmg_bandit_detailed(config, oracle)?.trace)
}

pub fn run_vmg_bandit_detailed(config: &MatrixVmgConfig, oracle: &NoiseOracle) -> Result<MatrixRun> {
    if config.spec.beta == 0.0 {
        return Err(VmgError::BetaZeroUnsupported);
    }
    if config.n != 1 {
        return Err(VmgError::DimensionMismatch { expected: 1, actual: config.n });
    }
    let mut lp = Loop::new(config, oracle)?;
    let mut rng = seeded_rng(config.seed);
    let spec = &config.spec;
    let one = Simplex::uniform(1);
    let best = max_value(&lp.a_true, &one, spec)?;
    let outcome = (|| -> Result<()> {
        for _ in 0..config.rounds {
            let clock = config.record_wallclock.then(Instant::now);
            let a_prev = lp.features.payoff_matrix(&lp.omega);
            let mu = best_response_max(&a_prev, &one, spec)?;
            let gap = (best - reg_game_value(&lp.a_true, &mu, &one, spec)?).max(0.0);

            let i = sample_index(mu.as_slice(), &mut rng);
            lp.observe(i, 0, &mut rng)?;
            lp.update(&Regularizer::TwoSided { mu: &mu, nu: &one }, spec)?;

            let a_t = lp.features.payoff_matrix(&lp.omega);
            let mu_tilde = best_response_max(&a_t, &one, spec)?;
            lp.states.push(RoundState {
                omega_t: lp.omega.clone(),
                mu_t: mu,
                nu_t: one.clone(),
                mu_tilde_t: mu_tilde,
                nu_tilde_t: one.clone(),
                gap_t: gap,
            });
            lp.trace.push(gap, elapsed_ms(clock));
        }
        Ok(())
    })();
    Ok(lp.finish(outcome))
}
