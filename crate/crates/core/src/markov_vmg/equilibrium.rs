//! Equilibria of Markov games by backward induction over stage games.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result, VmgError};
use crate::game_core::{RegGameSpec, Simplex};
use crate::linalg::{dot, log_sum_exp, softmax, Matrix};
use crate::markov_env::{kl_penalty, JointActionSpace, JointPolicy, PlayerPolicy, Rewards, TransitionTable};
use crate::matrix_vmg::{duality_gap, solve_matrix_ne_with, NeSolverSettings};
use crate::par::par_range_map;

/// Slack allowed on CCE deviation constraints.
pub const CCE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumMode {
    /// Two players, constant-sum rewards; product Nash policy.
    ZeroSumNe,
    /// Any number of players, `beta = 0`; welfare-maximizing CCE.
    GeneralCce,
}

/// A stage-wise equilibrium policy with its values under the model used.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub policy: JointPolicy,
    /// `V[h][s][n]`, `h = 0..=H`.
    pub values: Vec<f64>,
    /// Largest stage-game certificate: duality gap or best-response gain (NE), constraint violation (CCE).
    pub max_stage_residual: f64,
}

/// Welfare-maximizing coarse correlated equilibrium of a one-shot game.
/// `q[n][a]` is player `n`'s payoff at joint action `a`.
pub fn stage_cce(space: &JointActionSpace, q: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_len(space.players(), q.len())?;
    let size = space.size();
    for row in q {
        check_len(size, row.len())?;
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..size).map(|a| lp.add_var(q.iter().map(|r| r[a]).sum(), (0.0, 1.0))).collect();
    let all: Vec<_> = vars.iter().map(|&v| (v, 1.0)).collect();
    lp.add_constraint(all.as_slice(), ComparisonOp::Eq, 1.0);
    for (n, qn) in q.iter().enumerate() {
        for dev in 0..space.player_actions(n) {
            let terms: Vec<_> = (0..size)
                .map(|a| (vars[a], qn[a] - qn[space.replace(a, n, dev)]))
                .filter(|(_, c)| *c != 0.0)
                .collect();
            if !terms.is_empty() {
                lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, 0.0);
            }
        }
    }
    let solution = lp
        .solve()
        .map_err(|e| match e {
            microlp::Error::Infeasible => VmgError::LpInfeasible("stage CCE".into()),
            other => VmgError::LpFailure(other.to_string()),
        })?
        .into_solution()
        .map_err(|_| VmgError::LpFailure("stage CCE solve interrupted".into()))?;
    let mut x: Vec<f64> = vars.iter().map(|&v| solution.var_value(v).max(0.0)).collect();
    let total: f64 = x.iter().sum();
    if !(total > 0.0) {
        return Err(VmgError::LpFailure("stage CCE returned no mass".into()));
    }
    x.iter_mut().for_each(|v| *v /= total);
    let violation = cce_violation(space, q, &x);
    if violation > CCE_SLACK {
        return Err(VmgError::LpFailure(format!("stage CCE violates a deviation constraint by {violation}")));
    }
    Ok(x)
}

/// Largest gain any player gets by committing to a fixed action instead of following `x`.
pub fn cce_violation(space: &JointActionSpace, q: &[Vec<f64>], x: &[f64]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (n, qn) in q.iter().enumerate() {
        let follow = dot(x, qn);
        for dev in 0..space.player_actions(n) {
            let deviate: f64 = x.iter().enumerate().map(|(a, w)| w * qn[space.replace(a, n, dev)]).sum();
            worst = worst.max(deviate - follow);
        }
    }
    worst
}

struct StageOut {
    row: Vec<f64>,
    values: Vec<f64>,
    residual: f64,
}

/// Solves the stage game at one state given the players' `Q` over joint actions.
#[allow(clippy::too_many_arguments)]
pub(crate) fn solve_stage(
    space: &JointActionSpace,
    q: &[Vec<f64>],
    refs: &[&[f64]],
    beta: f64,
    mode: EquilibriumMode,
    tol: f64,
    state: usize,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let out = match mode {
        EquilibriumMode::GeneralCce => {
            if beta != 0.0 {
                return Err(VmgError::Unsupported("the CCE mode requires beta = 0".into()));
            }
            let row = stage_cce(space, q)?;
            let values = q.iter().map(|qn| dot(&row, qn)).collect();
            let residual = cce_violation(space, q, &row).max(0.0);
            StageOut { row, values, residual }
        }
        EquilibriumMode::ZeroSumNe => {
            let (m, n) = (space.player_actions(0), space.player_actions(1));
            let diff = Matrix::from_fn(m, n, |i, j| {
                let a = i * n + j;
                0.5 * (q[0][a] - q[1][a])
            });
            let spec = RegGameSpec::new(beta, Simplex::new(refs[0].to_vec())?, Simplex::new(refs[1].to_vec())?)?;
            let sol = solve_matrix_ne_with(&diff, &spec, tol, None, &NeSolverSettings::default())?;
            let (mut mu, mut nu) = (sol.mu.into_vec(), sol.nu.into_vec());
            let mut residual = duality_gap(&diff, &Simplex::new(mu.clone())?, &Simplex::new(nu.clone())?, &spec)?;
            if beta > 0.0 {
                let q0 = Matrix::from_fn(m, n, |i, j| q[0][i * n + j]);
                let q1 = Matrix::from_fn(m, n, |i, j| q[1][i * n + j]);
                (mu, nu, residual) = refine_regularized(&q0, &q1, refs, beta, mu, nu, tol);
            }
            let mut row = vec![0.0; m * n];
            for i in 0..m {
                for j in 0..n {
                    row[i * n + j] = mu[i] * nu[j];
                }
            }
            let mut values: Vec<f64> = q.iter().map(|qn| dot(&row, qn)).collect();
            values[0] -= kl_penalty(&mu, refs[0], beta, state)?;
            values[1] -= kl_penalty(&nu, refs[1], beta, state)?;
            StageOut { row, values, residual }
        }
    };
    Ok((out.row, out.values, out.residual))
}

/// What a player gains by switching from `p` to its regularized best response against `g`.
fn regularized_gain(g: &[f64], p: &[f64], r: &[f64], beta: f64) -> f64 {
    let kl: f64 = p.iter().zip(r).filter(|(x, _)| **x > 0.0).map(|(x, y)| x * (x / y).ln()).sum();
    let logits: Vec<f64> = g.iter().zip(r).map(|(gi, ri)| ri.ln() + gi / beta).collect();
    (beta * log_sum_exp(&logits) - (dot(p, g) - beta * kl)).max(0.0)
}

fn stage_gain(q0: &Matrix, q1: &Matrix, refs: &[&[f64]], beta: f64, mu: &[f64], nu: &[f64]) -> f64 {
    let g0 = q0.mul_vec(nu);
    let g1 = q1.vec_mul(mu);
    regularized_gain(&g0, mu, refs[0], beta).max(regularized_gain(&g1, nu, refs[1], beta))
}

fn entropic_step(base: &[f64], r: &[f64], g: &[f64], beta: f64, eta: f64) -> Vec<f64> {
    let logits: Vec<f64> = base
        .iter()
        .zip(r)
        .zip(g)
        .map(|((b, ri), gi)| (1.0 - eta * beta) * b.max(1e-300).ln() + eta * beta * ri.ln() + eta * gi)
        .collect();
    softmax(&logits)
}

/// With `beta > 0` each player's own penalty enters its continuation value, so the
/// stage game is only close to zero-sum. Extragradient on the two regularized payoffs,
/// warm-started at the zero-sum solution, keeping the iterate with the smallest gain.
fn refine_regularized(
    q0: &Matrix,
    q1: &Matrix,
    refs: &[&[f64]],
    beta: f64,
    mut mu: Vec<f64>,
    mut nu: Vec<f64>,
    tol: f64,
) -> (Vec<f64>, Vec<f64>, f64) {
    let scale = q0.max_abs().max(q1.max_abs());
    let eta = 1.0 / (beta + 2.0 * scale);
    let mut best = (mu.clone(), nu.clone(), stage_gain(q0, q1, refs, beta, &mu, &nu));
    for k in 0..REFINE_ITERS {
        if best.2 <= tol {
            break;
        }
        let mu_h = entropic_step(&mu, refs[0], &q0.mul_vec(&nu), beta, eta);
        let nu_h = entropic_step(&nu, refs[1], &q1.vec_mul(&mu), beta, eta);
        mu = entropic_step(&mu, refs[0], &q0.mul_vec(&nu_h), beta, eta);
        nu = entropic_step(&nu, refs[1], &q1.vec_mul(&mu_h), beta, eta);
        if k % 16 == 15 {
            let gain = stage_gain(q0, q1, refs, beta, &mu, &nu);
            if gain < best.2 {
                best = (mu.clone(), nu.clone(), gain);
            }
        }
    }
    best
}

const REFINE_ITERS: usize = 100_000;

fn check_mode(rewards: &Rewards, mode: EquilibriumMode) -> Result<()> {
    if mode == EquilibriumMode::ZeroSumNe && !rewards.is_constant_sum() {
        return Err(VmgError::Unsupported("zero-sum mode needs two players with r^2 = 1 - r^1".into()));
    }
    Ok(())
}

/// Backward induction with one stage-game solve per `(h, s)`.
pub fn equilibrium(
    p: &TransitionTable,
    rewards: &Rewards,
    beta: f64,
    pi_ref: &[PlayerPolicy],
    space: &JointActionSpace,
    mode: EquilibriumMode,
    tol: f64,
) -> Result<Equilibrium> {
    check_mode(rewards, mode)?;
    check_len(space.size(), p.actions())?;
    check_len(p.horizon(), rewards.horizon())?;
    check_len(p.states(), rewards.states())?;
    check_len(space.players(), pi_ref.len())?;
    let (hz, ns, na, np) = (p.horizon(), p.states(), p.actions(), space.players());
    let mut values = vec![0.0; (hz + 1) * ns * np];
    let mut probs = vec![0.0; hz * ns * na];
    let mut max_residual = 0.0f64;
    for h in (0..hz).rev() {
        let next: Vec<Vec<f64>> =
            (0..np).map(|n| (0..ns).map(|s| values[((h + 1) * ns + s) * np + n]).collect()).collect();
        let stages = par_range_map(ns, |s| {
            let q: Vec<Vec<f64>> = (0..np)
                .map(|n| (0..na).map(|a| rewards.get(h, s, a, n) + dot(p.row(h, s, a), &next[n])).collect())
                .collect();
            let refs: Vec<&[f64]> = pi_ref.iter().map(|r| r.row(h, s)).collect();
            solve_stage(space, &q, &refs, beta, mode, tol, s)
        });
        for (s, stage) in stages.into_iter().enumerate() {
            let (row, v, residual) = stage?;
            probs[(h * ns + s) * na..(h * ns + s + 1) * na].copy_from_slice(&row);
            for (n, x) in v.into_iter().enumerate() {
                values[(h * ns + s) * np + n] = x;
            }
            max_residual = max_residual.max(residual);
        }
    }
    let mut policy = JointPolicy::new(hz, ns, space.clone(), probs)?;
    policy.product = mode == EquilibriumMode::ZeroSumNe;
    Ok(Equilibrium { policy, values, max_stage_residual: max_residual })
}
