//! Exact discounted evaluation: visitation, values, best responses, equilibria and the gap.

use serde::{Deserialize, Serialize};

use crate::error::{check_index, check_len, Result, VmgError};
use crate::game_core::Simplex;
use crate::linalg::{dot, solve_dense, Matrix};
use crate::markov_env::{
    kl_penalty, soft_improve, GapReport, JointActionSpace, JointPolicy, PlayerPolicy, Rewards, TransitionTable,
};
use crate::markov_vmg::{solve_stage, EquilibriumMode};
use crate::par::par_range_map;

use super::game::DiscountedMarkovGame;

/// Value-change tolerance of policy iteration.
pub const PI_TOL: f64 = 1e-9;
/// Iteration cap of policy iteration.
pub const PI_CAP: usize = 10_000;

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(VmgError::InvalidModel(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    Ok(())
}

fn check_stationary(p: &TransitionTable, policy: &JointPolicy) -> Result<()> {
    check_len(1, p.horizon())?;
    check_len(1, policy.horizon())?;
    check_len(p.states(), policy.states())?;
    check_len(p.actions(), policy.space().size())
}

/// `P_pi(s, s') = sum_a pi(a|s) P(s'|s, a)`.
fn state_kernel(p: &TransitionTable, policy: &JointPolicy) -> Matrix {
    let ns = p.states();
    let mut m = Matrix::zeros(ns, ns);
    for s in 0..ns {
        for (a, &w) in policy.row(0, s).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (s2, &q) in p.row(0, s, a).iter().enumerate() {
                m.set(s, s2, m.get(s, s2) + w * q);
            }
        }
    }
    m
}

/// `d(s, a) = nu(s) pi(a|s)` with `nu = (1 - gamma) rho + gamma nu P_pi`, flattened as `[s][a]`.
pub fn discounted_visitation_exact(
    p: &TransitionTable,
    policy: &JointPolicy,
    rho: &Simplex,
    gamma: f64,
) -> Result<Simplex> {
    check_gamma(gamma)?;
    check_stationary(p, policy)?;
    check_len(p.states(), rho.len())?;
    let ns = p.states();
    let kernel = state_kernel(p, policy);
    let system = Matrix::from_fn(ns, ns, |i, j| f64::from(u8::from(i == j)) - gamma * kernel.get(j, i));
    let rhs: Vec<f64> = rho.as_slice().iter().map(|r| (1.0 - gamma) * r).collect();
    let nu = solve_dense(&system, &rhs)?;
    let mut d = Vec::with_capacity(ns * p.actions());
    for (s, &mass) in nu.iter().enumerate() {
        d.extend(policy.row(0, s).iter().map(|w| (mass * w).max(0.0)));
    }
    Simplex::from_weights(d)
}

/// Stationary values `V[s][n]` and `Q[s][a][n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountedValues {
    pub states: usize,
    pub actions: usize,
    pub players: usize,
    pub gamma: f64,
    v: Vec<f64>,
    q: Vec<f64>,
}

impl DiscountedValues {
    #[inline]
    pub fn v(&self, s: usize, n: usize) -> f64 {
        self.v[s * self.players + n]
    }

    #[inline]
    pub fn q(&self, s: usize, a: usize, n: usize) -> f64 {
        self.q[(s * self.actions + a) * self.players + n]
    }

    pub fn player_values(&self, n: usize) -> Vec<f64> {
        (0..self.states).map(|s| self.v(s, n)).collect()
    }

    pub fn value_at(&self, rho: &Simplex, n: usize) -> f64 {
        (0..self.states).map(|s| rho[s] * self.v(s, n)).sum()
    }
}

fn check_model(p: &TransitionTable, policy: &JointPolicy, pi_ref: &[PlayerPolicy], rewards: &Rewards) -> Result<()> {
    check_stationary(p, policy)?;
    check_len(1, rewards.horizon())?;
    check_len(p.states(), rewards.states())?;
    check_len(p.actions(), rewards.actions())?;
    check_len(policy.space().players(), rewards.players())?;
    check_len(rewards.players(), pi_ref.len())?;
    for (n, r) in pi_ref.iter().enumerate() {
        check_len(1, r.horizon())?;
        check_len(p.states(), r.states())?;
        check_len(policy.space().player_actions(n), r.actions())?;
    }
    Ok(())
}

/// Exact evaluation: `(I - gamma P_pi) V_n = r_pi,n - beta KL(pi^n || pi_ref^n)` per player.
pub fn discounted_values(
    p: &TransitionTable,
    policy: &JointPolicy,
    beta: f64,
    pi_ref: &[PlayerPolicy],
    rewards: &Rewards,
    gamma: f64,
) -> Result<DiscountedValues> {
    check_gamma(gamma)?;
    check_model(p, policy, pi_ref, rewards)?;
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(VmgError::InvalidModel(format!("beta must be finite and >= 0, got {beta}")));
    }
    let (ns, na, np) = (p.states(), p.actions(), rewards.players());
    let kernel = state_kernel(p, policy);
    let system = Matrix::from_fn(ns, ns, |i, j| f64::from(u8::from(i == j)) - gamma * kernel.get(i, j));
    let mut v = vec![0.0; ns * np];
    let mut q = vec![0.0; ns * na * np];
    for n in 0..np {
        let mut rhs = Vec::with_capacity(ns);
        for s in 0..ns {
            let row = policy.row(0, s);
            let mut r: f64 = (0..na).map(|a| row[a] * rewards.get(0, s, a, n)).sum();
            if beta > 0.0 {
                r -= kl_penalty(&policy.marginal_row(0, s, n), pi_ref[n].row(0, s), beta, s)?;
            }
            rhs.push(r);
        }
        let vn = solve_dense(&system, &rhs)?;
        for s in 0..ns {
            v[s * np + n] = vn[s];
            for a in 0..na {
                q[(s * na + a) * np + n] = rewards.get(0, s, a, n) + gamma * dot(p.row(0, s, a), &vn);
            }
        }
    }
    Ok(DiscountedValues { states: ns, actions: na, players: np, gamma, v, q })
}

/// A stationary best response with its values `V*[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedBestResponse {
    pub policy: PlayerPolicy,
    pub values: Vec<f64>,
    pub iterations: usize,
}

impl DiscountedBestResponse {
    pub fn value_at(&self, rho: &Simplex) -> f64 {
        dot(rho.as_slice(), &self.values)
    }
}

/// Regularized policy iteration for player `n` against the others' part of `policy`.
pub fn discounted_best_response(
    p: &TransitionTable,
    policy: &JointPolicy,
    n: usize,
    beta: f64,
    gamma: f64,
    pi_ref: &[PlayerPolicy],
    rewards: &Rewards,
) -> Result<DiscountedBestResponse> {
    check_model(p, policy, pi_ref, rewards)?;
    check_index(n, rewards.players())?;
    let space = policy.space();
    let (ns, an) = (p.states(), space.player_actions(n));
    let mut dev = pi_ref[n].clone();
    let mut prev: Option<Vec<f64>> = None;
    for it in 0..PI_CAP {
        let vals = discounted_values(p, &policy.deviate(n, &dev)?, beta, pi_ref, rewards, gamma)?;
        let vn = vals.player_values(n);
        if let Some(old) = &prev {
            if crate::linalg::max_abs_diff(old, &vn) <= PI_TOL {
                return Ok(DiscountedBestResponse { policy: dev, values: vn, iterations: it });
            }
        }
        let mut probs = Vec::with_capacity(ns * an);
        for s in 0..ns {
            let mut q_bar = vec![0.0; an];
            for (b, &w) in policy.row(0, s).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (a_n, slot) in q_bar.iter_mut().enumerate() {
                    *slot += w * vals.q(s, space.replace(b, n, a_n), n);
                }
            }
            probs.extend(soft_improve(&q_bar, pi_ref[n].row(0, s), beta).0);
        }
        dev = PlayerPolicy::new(1, ns, an, probs)?;
        prev = Some(vn);
    }
    Err(VmgError::NonConvergence { iterations: PI_CAP, residual: f64::NAN })
}

/// `(1/N) sum_n max(0, V*_n(rho) - V_n(rho))` with discounted values.
pub fn discounted_gap_under(
    p: &TransitionTable,
    rewards: &Rewards,
    rho: &Simplex,
    pi_ref: &[PlayerPolicy],
    policy: &JointPolicy,
    beta: f64,
    gamma: f64,
) -> Result<GapReport> {
    let on = discounted_values(p, policy, beta, pi_ref, rewards, gamma)?;
    let np = rewards.players();
    let mut values = Vec::with_capacity(np);
    let mut best_values = Vec::with_capacity(np);
    let mut deviations = Vec::with_capacity(np);
    for n in 0..np {
        let v = on.value_at(rho, n);
        let b = discounted_best_response(p, policy, n, beta, gamma, pi_ref, rewards)?.value_at(rho);
        values.push(v);
        best_values.push(b);
        deviations.push(b - v);
    }
    let gap = deviations.iter().map(|x| x.max(0.0)).sum::<f64>() / np as f64;
    Ok(GapReport { gap, deviations, values, best_values })
}

/// Gap of `policy` under the game's true kernel.
pub fn discounted_nash_gap(game: &DiscountedMarkovGame, policy: &JointPolicy, beta: f64) -> Result<f64> {
    Ok(discounted_gap_under(game.table(), &game.rewards, &game.rho, &game.pi_ref, policy, beta, game.gamma)?.gap)
}

/// Stationary equilibrium found by value iteration over stage games.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedEquilibrium {
    pub policy: JointPolicy,
    /// `V[s][n]` as produced by the last sweep.
    pub values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub max_stage_residual: f64,
}

/// Value-iteration cap of [`discounted_equilibrium`].
pub const EQ_VI_CAP: usize = 5_000;

/// Shapley-style iteration `V_n(s) <- stage value of r + gamma P V`; stops
/// once the sup-norm change drops below `tol`. Starts from `init` when given.
#[allow(clippy::too_many_arguments)]
pub fn discounted_equilibrium(
    p: &TransitionTable,
    rewards: &Rewards,
    beta: f64,
    pi_ref: &[PlayerPolicy],
    space: &JointActionSpace,
    mode: EquilibriumMode,
    gamma: f64,
    tol: f64,
    init: Option<&[f64]>,
) -> Result<DiscountedEquilibrium> {
    check_gamma(gamma)?;
    if mode == EquilibriumMode::ZeroSumNe && !rewards.is_constant_sum() {
        return Err(VmgError::Unsupported("zero-sum mode needs two players with r^2 = 1 - r^1".into()));
    }
    check_len(1, p.horizon())?;
    check_len(space.size(), p.actions())?;
    check_len(p.states(), rewards.states())?;
    check_len(space.players(), pi_ref.len())?;
    let (ns, na, np) = (p.states(), p.actions(), space.players());
    let mut values = match init {
        Some(v) => {
            check_len(ns * np, v.len())?;
            v.to_vec()
        }
        None => vec![0.0; ns * np],
    };
    let mut probs = vec![0.0; ns * na];
    let mut residual = 0.0f64;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < EQ_VI_CAP {
        iterations += 1;
        let next: Vec<Vec<f64>> = (0..np).map(|n| (0..ns).map(|s| values[s * np + n]).collect()).collect();
        let stages = par_range_map(ns, |s| {
            let q: Vec<Vec<f64>> = (0..np)
                .map(|n| (0..na).map(|a| rewards.get(0, s, a, n) + gamma * dot(p.row(0, s, a), &next[n])).collect())
                .collect();
            let refs: Vec<&[f64]> = pi_ref.iter().map(|r| r.row(0, s)).collect();
            solve_stage(space, &q, &refs, beta, mode, tol, s)
        });
        let mut change = 0.0f64;
        residual = 0.0;
        for (s, stage) in stages.into_iter().enumerate() {
            let (row, v, r) = stage?;
            probs[s * na..(s + 1) * na].copy_from_slice(&row);
            for (n, x) in v.into_iter().enumerate() {
                change = change.max((x - values[s * np + n]).abs());
                values[s * np + n] = x;
            }
            residual = residual.max(r);
        }
        if change <= tol {
            converged = true;
            break;
        }
    }
    let mut policy = JointPolicy::new(1, ns, space.clone(), probs)?;
    policy.product = mode == EquilibriumMode::ZeroSumNe;
    Ok(DiscountedEquilibrium { policy, values, iterations, converged, max_stage_residual: residual })
}
