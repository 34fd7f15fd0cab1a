//! Brute-force references for Markov games: forward evaluation, exhaustive
//! deterministic best responses, truncated visitation series and fixed-point iteration.

use crate::error::{Result, VmgError};
use crate::markov_env::{FiniteMarkovGame, JointPolicy, PlayerPolicy, Rewards, TransitionTable};

/// Largest deterministic policy space the enumeration accepts.
pub const ENUMERATION_LIMIT: u128 = 100_000;

fn digit(sizes: &[usize], idx: usize, n: usize) -> usize {
    let stride: usize = sizes[n + 1..].iter().product();
    (idx / stride) % sizes[n]
}

fn with_digit(sizes: &[usize], idx: usize, n: usize, v: usize) -> usize {
    let stride: usize = sizes[n + 1..].iter().product();
    idx - digit(sizes, idx, n) * stride + v * stride
}

fn kl(p: &[f64], r: &[f64]) -> f64 {
    p.iter().zip(r).filter(|(x, _)| **x > 0.0).map(|(x, y)| x * (x / y).ln()).sum()
}

fn marginal(sizes: &[usize], row: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; sizes[n]];
    for (idx, w) in row.iter().enumerate() {
        out[digit(sizes, idx, n)] += w;
    }
    out
}

/// Player `n`'s regularized value of `policy` by pushing the state distribution forward.
pub fn forward_value(
    p: &TransitionTable,
    rewards: &Rewards,
    rho: &[f64],
    policy: &JointPolicy,
    n: usize,
    beta: f64,
    pi_ref: &[PlayerPolicy],
) -> f64 {
    let sizes = policy.space().sizes().to_vec();
    let (hz, ns) = (p.horizon(), p.states());
    let mut dist = rho.to_vec();
    let mut total = 0.0;
    for h in 0..hz {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if dist[s] == 0.0 {
                continue;
            }
            let row = policy.row(h, s);
            let mut stage = 0.0;
            for (a, &w) in row.iter().enumerate() {
                stage += w * rewards.get(h, s, a, n);
                for (s2, q) in p.row(h, s, a).iter().enumerate() {
                    next[s2] += dist[s] * w * q;
                }
            }
            if beta > 0.0 {
                stage -= beta * kl(&marginal(&sizes, row, n), pi_ref[n].row(h, s));
            }
            total += dist[s] * stage;
        }
        dist = next;
    }
    total
}

/// Best value of player `n` over every deterministic Markov policy, others fixed, `beta = 0`.
pub fn enumerate_deterministic_best_response_under(
    p: &TransitionTable,
    rewards: &Rewards,
    rho: &[f64],
    policy: &JointPolicy,
    n: usize,
) -> Result<f64> {
    let sizes = policy.space().sizes().to_vec();
    let (hz, ns) = (p.horizon(), p.states());
    let an = sizes[n] as u128;
    let count = u32::try_from(hz * ns)
        .ok()
        .and_then(|e| an.checked_pow(e))
        .ok_or(VmgError::SpaceTooLarge(u128::MAX))?;
    if count > ENUMERATION_LIMIT {
        return Err(VmgError::SpaceTooLarge(count));
    }
    let mut best = f64::NEG_INFINITY;
    let mut choice = vec![0usize; hz * ns];
    for code in 0..count {
        let mut rest = code;
        for c in choice.iter_mut() {
            *c = (rest % an) as usize;
            rest /= an;
        }
        let mut dist = rho.to_vec();
        let mut total = 0.0;
        for h in 0..hz {
            let mut next = vec![0.0; ns];
            for s in 0..ns {
                if dist[s] == 0.0 {
                    continue;
                }
                let mine = choice[h * ns + s];
                for (b, &w) in policy.row(h, s).iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let a = with_digit(&sizes, b, n, mine);
                    total += dist[s] * w * rewards.get(h, s, a, n);
                    for (s2, q) in p.row(h, s, a).iter().enumerate() {
                        next[s2] += dist[s] * w * q;
                    }
                }
            }
            dist = next;
        }
        best = best.max(total);
    }
    Ok(best)
}

pub fn enumerate_deterministic_best_response(game: &FiniteMarkovGame, policy: &JointPolicy, n: usize) -> Result<f64> {
    enumerate_deterministic_best_response_under(game.table(), &game.rewards, game.rho.as_slice(), policy, n)
}

/// `(1/N) sum_n max(0, V*_n - V_n)` at `beta = 0`, from enumeration and forward evaluation only.
pub fn enumerated_nash_gap(game: &FiniteMarkovGame, policy: &JointPolicy) -> Result<f64> {
    let np = game.players();
    let mut total = 0.0;
    for n in 0..np {
        let best = enumerate_deterministic_best_response(game, policy, n)?;
        let on = forward_value(game.table(), &game.rewards, game.rho.as_slice(), policy, n, 0.0, &game.pi_ref);
        total += (best - on).max(0.0);
    }
    Ok(total / np as f64)
}

/// `sum_{h < terms} (1 - gamma) gamma^h d_h(s, a)` for a stationary policy, as `[s][a]`.
pub fn truncated_visitation(p: &TransitionTable, policy: &JointPolicy, rho: &[f64], gamma: f64, terms: usize) -> Vec<f64> {
    let (ns, na) = (p.states(), p.actions());
    let mut out = vec![0.0; ns * na];
    let mut dist = rho.to_vec();
    let mut weight = 1.0 - gamma;
    for _ in 0..terms {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            for (a, &w) in policy.row(0, s).iter().enumerate() {
                let mass = dist[s] * w;
                out[s * na + a] += weight * mass;
                for (s2, q) in p.row(0, s, a).iter().enumerate() {
                    next[s2] += mass * q;
                }
            }
        }
        dist = next;
        weight *= gamma;
    }
    out
}

/// Discounted values of player `n` under a stationary policy by repeated Bellman backups.
#[allow(clippy::too_many_arguments)]
pub fn iterate_policy_values(
    p: &TransitionTable,
    rewards: &Rewards,
    policy: &JointPolicy,
    n: usize,
    beta: f64,
    pi_ref: &[PlayerPolicy],
    gamma: f64,
    tol: f64,
) -> Vec<f64> {
    let sizes = policy.space().sizes().to_vec();
    let ns = p.states();
    let stage: Vec<f64> = (0..ns)
        .map(|s| {
            let row = policy.row(0, s);
            let r: f64 = row.iter().enumerate().map(|(a, w)| w * rewards.get(0, s, a, n)).sum();
            if beta > 0.0 {
                r - beta * kl(&marginal(&sizes, row, n), pi_ref[n].row(0, s))
            } else {
                r
            }
        })
        .collect();
    let mut v = vec![0.0; ns];
    loop {
        let mut next = stage.clone();
        for (s, x) in next.iter_mut().enumerate() {
            for (a, &w) in policy.row(0, s).iter().enumerate() {
                let ev: f64 = p.row(0, s, a).iter().zip(&v).map(|(q, y)| q * y).sum();
                *x += gamma * w * ev;
            }
        }
        let change = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if change <= tol {
            return v;
        }
    }
}

/// Optimal discounted values of a single-player game by value iteration
/// (soft maximum against `pi_ref` when `beta > 0`).
pub fn value_iteration(
    p: &TransitionTable,
    rewards: &Rewards,
    beta: f64,
    pi_ref: &PlayerPolicy,
    gamma: f64,
    tol: f64,
) -> Vec<f64> {
    let (ns, na) = (p.states(), p.actions());
    let mut v = vec![0.0; ns];
    loop {
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                let q: Vec<f64> = (0..na)
                    .map(|a| rewards.get(0, s, a, 0) + gamma * p.row(0, s, a).iter().zip(&v).map(|(x, y)| x * y).sum::<f64>())
                    .collect();
                if beta == 0.0 {
                    q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                } else {
                    let top = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = q.iter().zip(pi_ref.row(0, s)).map(|(x, r)| r * ((x - top) / beta).exp()).sum();
                    top + beta * z.ln()
                }
            })
            .collect();
        let change = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if change <= tol {
            return v;
        }
    }
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn finite_diff_grad(f: impl Fn(&[f64]) -> Result<f64>, x: &[f64], step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(VmgError::ConfigInvalid(format!("step must be > 0, got {step}")));
    }
    let mut probe = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f(&probe)?;
        probe[i] = x[i] - step;
        let down = f(&probe)?;
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(VmgError::NonFiniteObjective);
        }
        g.push((up - down) / (2.0 * step));
    }
    Ok(g)
}
