use serde::{Deserialize, Serialize};

use super::kernel::{Rewards, TransitionTable};
use super::policy::{JointPolicy, PlayerPolicy};
use crate::error::{check_index, check_len, Result, VmgError};
use crate::game_core::Simplex;
use crate::linalg::{argmax, dot, log_sum_exp, softmax};

/// Regularized values `V[h][s][n]` (with `V_H = 0`) and `Q[h][s][a][n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub horizon: usize,
    pub states: usize,
    pub actions: usize,
    pub players: usize,
    pub beta: f64,
    v: Vec<f64>,
    q: Vec<f64>,
}

impl ValueTable {
    #[inline]
    pub fn v(&self, h: usize, s: usize, n: usize) -> f64 {
        self.v[(h * self.states + s) * self.players + n]
    }

    #[inline]
    pub fn q(&self, h: usize, s: usize, a: usize, n: usize) -> f64 {
        self.q[((h * self.states + s) * self.actions + a) * self.players + n]
    }

    /// `V_n(rho)` at the first step.
    pub fn value_at(&self, rho: &Simplex, n: usize) -> f64 {
        (0..self.states).map(|s| rho[s] * self.v(0, s, n)).sum()
    }
}

/// `beta * KL(p || r)`; zero when `beta = 0`.
pub(crate) fn kl_penalty(p: &[f64], r: &[f64], beta: f64, state: usize) -> Result<f64> {
    if beta == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (a, (&x, &y)) in p.iter().zip(r).enumerate() {
        if x <= 0.0 {
            continue;
        }
        if y <= 0.0 {
            return Err(VmgError::NonFiniteKl { state, action: a });
        }
        total += x * (x / y).ln();
    }
    Ok(beta * total)
}

fn check_model(p: &TransitionTable, rewards: &Rewards, policy: &JointPolicy, pi_ref: &[PlayerPolicy]) -> Result<()> {
    check_len(p.horizon(), policy.horizon())?;
    check_len(p.horizon(), rewards.horizon())?;
    check_len(p.states(), policy.states())?;
    check_len(p.states(), rewards.states())?;
    check_len(p.actions(), policy.space().size())?;
    check_len(p.actions(), rewards.actions())?;
    check_len(rewards.players(), policy.space().players())?;
    check_len(rewards.players(), pi_ref.len())?;
    for (n, r) in pi_ref.iter().enumerate() {
        check_len(policy.space().player_actions(n), r.actions())?;
        check_len(p.horizon(), r.horizon())?;
        check_len(p.states(), r.states())?;
    }
    Ok(())
}

/// Backward induction of every player's regularized value under `policy`.
pub fn evaluate_values(
    p: &TransitionTable,
    policy: &JointPolicy,
    beta: f64,
    pi_ref: &[PlayerPolicy],
    rewards: &Rewards,
) -> Result<ValueTable> {
    check_model(p, rewards, policy, pi_ref)?;
    if !(beta >= 0.0) {
        return Err(VmgError::InvalidModel(format!("beta must be >= 0, got {beta}")));
    }
    let (hz, ns, na, np) = (p.horizon(), p.states(), p.actions(), rewards.players());
    let mut v = vec![0.0; (hz + 1) * ns * np];
    let mut q = vec![0.0; hz * ns * na * np];
    let mut next = vec![0.0; ns];
    for h in (0..hz).rev() {
        for n in 0..np {
            for (s2, x) in next.iter_mut().enumerate() {
                *x = v[((h + 1) * ns + s2) * np + n];
            }
            for s in 0..ns {
                let row = policy.row(h, s);
                let mut total = 0.0;
                for a in 0..na {
                    let qa = rewards.get(h, s, a, n) + dot(p.row(h, s, a), &next);
                    q[((h * ns + s) * na + a) * np + n] = qa;
                    total += row[a] * qa;
                }
                if beta > 0.0 {
                    let marginal = policy.marginal_row(h, s, n);
                    total -= kl_penalty(&marginal, pi_ref[n].row(h, s), beta, s)?;
                }
                v[(h * ns + s) * np + n] = total;
            }
        }
    }
    Ok(ValueTable { horizon: hz, states: ns, actions: na, players: np, beta, v, q })
}

/// A best-response policy and its optimal values `V*[h][s]`, `h = 0..=H`.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub policy: PlayerPolicy,
    values: Vec<f64>,
    states: usize,
}

impl BestResponse {
    pub fn value(&self, h: usize, s: usize) -> f64 {
        self.values[h * self.states + s]
    }

    pub fn value_at(&self, rho: &Simplex) -> f64 {
        (0..self.states).map(|s| rho[s] * self.value(0, s)).sum()
    }
}

/// Soft (or hard, when `beta = 0`) maximization of `q_bar` against a reference row.
pub(crate) fn soft_improve(q_bar: &[f64], reference: &[f64], beta: f64) -> (Vec<f64>, f64) {
    if beta == 0.0 {
        let k = argmax(q_bar);
        let mut pi = vec![0.0; q_bar.len()];
        pi[k] = 1.0;
        return (pi, q_bar[k]);
    }
    let logits: Vec<f64> = q_bar.iter().zip(reference).map(|(q, r)| r.ln() + q / beta).collect();
    (softmax(&logits), beta * log_sum_exp(&logits))
}

/// Best response of player `n` to the others' part of `policy`.
pub fn best_response_dp(
    p: &TransitionTable,
    policy: &JointPolicy,
    n: usize,
    beta: f64,
    pi_ref: &[PlayerPolicy],
    rewards: &Rewards,
) -> Result<BestResponse> {
    check_model(p, rewards, policy, pi_ref)?;
    check_index(n, rewards.players())?;
    let space = policy.space();
    let (hz, ns, na) = (p.horizon(), p.states(), p.actions());
    let an = space.player_actions(n);
    let mut values = vec![0.0; (hz + 1) * ns];
    let mut probs = vec![0.0; hz * ns * an];
    let mut q = vec![0.0; na];
    for h in (0..hz).rev() {
        let (head, tail) = values.split_at_mut((h + 1) * ns);
        let next = &tail[..ns];
        for s in 0..ns {
            for (a, qa) in q.iter_mut().enumerate() {
                *qa = rewards.get(h, s, a, n) + dot(p.row(h, s, a), next);
            }
            let mut q_bar = vec![0.0; an];
            for (b, &w) in policy.row(h, s).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (a_n, slot) in q_bar.iter_mut().enumerate() {
                    *slot += w * q[space.replace(b, n, a_n)];
                }
            }
            let (pi, v) = soft_improve(&q_bar, pi_ref[n].row(h, s), beta);
            head[h * ns + s] = v;
            probs[(h * ns + s) * an..(h * ns + s + 1) * an].copy_from_slice(&pi);
        }
    }
    let policy = PlayerPolicy::new(hz, ns, an, probs)?;
    Ok(BestResponse { policy, values, states: ns })
}

/// State-action visitation `d_h(s, a)` from `rho`, stored as `[h][s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Visitation {
    pub horizon: usize,
    pub states: usize,
    pub actions: usize,
    d: Vec<f64>,
}

impl Visitation {
    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.d[(h * self.states + s) * self.actions + a]
    }

    pub fn step(&self, h: usize) -> &[f64] {
        let w = self.states * self.actions;
        &self.d[h * w..(h + 1) * w]
    }

    pub fn state_marginal(&self, h: usize) -> Vec<f64> {
        self.step(h).chunks(self.actions).map(|r| r.iter().sum()).collect()
    }
}

/// Forward recursion `d_1 = rho pi_1`, `d_{h+1}(s', .) = sum d_h(s, a) P_h(s'|s, a) pi_{h+1}(.|s')`.
pub fn visitation(p: &TransitionTable, policy: &JointPolicy, rho: &Simplex) -> Result<Visitation> {
    check_len(p.horizon(), policy.horizon())?;
    check_len(p.states(), policy.states())?;
    check_len(p.actions(), policy.space().size())?;
    check_len(p.states(), rho.len())?;
    let (hz, ns, na) = (p.horizon(), p.states(), p.actions());
    let mut d = vec![0.0; hz * ns * na];
    let mut state = rho.as_slice().to_vec();
    for h in 0..hz {
        for s in 0..ns {
            for (a, &w) in policy.row(h, s).iter().enumerate() {
                d[(h * ns + s) * na + a] = state[s] * w;
            }
        }
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                let w = d[(h * ns + s) * na + a];
                if w == 0.0 {
                    continue;
                }
                for (x, y) in next.iter_mut().zip(p.row(h, s, a)) {
                    *x += w * y;
                }
            }
        }
        state = next;
    }
    Ok(Visitation { horizon: hz, states: ns, actions: na, d })
}

/// Sub-optimality gap and its per-player ingredients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `(1/N) sum_n max(0, V*_n - V_n)`.
    pub gap: f64,
    /// Raw `V*_n - V_n` per player; may dip below zero for correlated policies.
    pub deviations: Vec<f64>,
    pub values: Vec<f64>,
    pub best_values: Vec<f64>,
}

/// Gap of `policy` under the given model.
pub fn nash_gap_under(
    p: &TransitionTable,
    rewards: &Rewards,
    rho: &Simplex,
    pi_ref: &[PlayerPolicy],
    policy: &JointPolicy,
    beta: f64,
) -> Result<GapReport> {
    let table = evaluate_values(p, policy, beta, pi_ref, rewards)?;
    let np = rewards.players();
    let mut values = Vec::with_capacity(np);
    let mut best_values = Vec::with_capacity(np);
    let mut deviations = Vec::with_capacity(np);
    for n in 0..np {
        let v = table.value_at(rho, n);
        let br = best_response_dp(p, policy, n, beta, pi_ref, rewards)?;
        let b = br.value_at(rho);
        values.push(v);
        best_values.push(b);
        deviations.push(b - v);
    }
    let gap = deviations.iter().map(|x| x.max(0.0)).sum::<f64>() / np as f64;
    Ok(GapReport { gap, deviations, values, best_values })
}
