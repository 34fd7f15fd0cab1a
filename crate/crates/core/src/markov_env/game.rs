use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::dp::{nash_gap_under, GapReport};
use super::kernel::{LinearMixtureKernel, MixtureFeatures, Rewards, TransitionTable};
use super::policy::{JointActionSpace, JointPolicy, PlayerPolicy};
use crate::error::{check_len, Result, VmgError};
use crate::game_core::Simplex;
use crate::linalg::sample_index;

pub const MAX_PLAYERS: usize = 3;
pub const MAX_PLAYER_ACTIONS: usize = 4;
pub const MAX_STATES: usize = 10;
pub const MAX_HORIZON: usize = 5;

/// Ground-truth finite-horizon Markov game.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMarkovGame {
    pub space: JointActionSpace,
    pub rewards: Rewards,
    pub kernel: LinearMixtureKernel,
    pub rho: Simplex,
    pub pi_ref: Vec<PlayerPolicy>,
    table: TransitionTable,
}

impl FiniteMarkovGame {
    pub fn new(
        space: JointActionSpace,
        rewards: Rewards,
        kernel: LinearMixtureKernel,
        rho: Simplex,
        pi_ref: Vec<PlayerPolicy>,
    ) -> Result<Self> {
        let (hz, ns, na) = (kernel.horizon(), kernel.states(), kernel.actions());
        check_len(space.size(), na)?;
        check_len(hz, rewards.horizon())?;
        check_len(ns, rewards.states())?;
        check_len(na, rewards.actions())?;
        check_len(space.players(), rewards.players())?;
        check_len(ns, rho.len())?;
        check_len(space.players(), pi_ref.len())?;
        for (n, r) in pi_ref.iter().enumerate() {
            check_len(space.player_actions(n), r.actions())?;
            check_len(hz, r.horizon())?;
            check_len(ns, r.states())?;
        }
        let table = kernel.table();
        Ok(Self { space, rewards, kernel, rho, pi_ref, table })
    }

    pub fn players(&self) -> usize {
        self.space.players()
    }

    pub fn states(&self) -> usize {
        self.kernel.states()
    }

    pub fn horizon(&self) -> usize {
        self.kernel.horizon()
    }

    pub fn d(&self) -> usize {
        self.kernel.d()
    }

    /// Dense transition table of the true kernel.
    pub fn table(&self) -> &TransitionTable {
        &self.table
    }
}

/// Parameters of the synthetic environment generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameGenParams {
    pub players: usize,
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub d: usize,
    /// Two players with `r^2 = 1 - r^1`.
    #[serde(default)]
    pub zero_sum: bool,
}

impl GameGenParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(VmgError::ConfigInvalid(msg));
        if self.players == 0 || self.players > MAX_PLAYERS {
            return bad(format!("players must be in 1..={MAX_PLAYERS}"));
        }
        if self.actions == 0 || self.actions > MAX_PLAYER_ACTIONS {
            return bad(format!("actions per player must be in 1..={MAX_PLAYER_ACTIONS}"));
        }
        if self.states == 0 || self.states > MAX_STATES {
            return bad(format!("states must be in 1..={MAX_STATES}"));
        }
        if self.horizon == 0 || self.horizon > MAX_HORIZON {
            return bad(format!("horizon must be in 1..={MAX_HORIZON}"));
        }
        if self.d == 0 {
            return bad("d must be >= 1".into());
        }
        if self.states == 1 && self.d > 1 {
            return bad("a single state admits only d = 1 bounded base kernels".into());
        }
        if self.zero_sum && self.players != 2 {
            return bad("zero-sum games need exactly 2 players".into());
        }
        Ok(())
    }
}

pub(crate) fn dirichlet_one<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let x: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = x.iter().sum();
    x.iter().map(|v| v / s).collect()
}

/// Dirichlet(1) base kernels, resampled per `(h, s, a)` until every
/// `phi_h(s, a, s')` has norm at most one.
pub(crate) fn random_features<R: Rng + ?Sized>(
    horizon: usize,
    states: usize,
    actions: usize,
    d: usize,
    rng: &mut R,
) -> Result<MixtureFeatures> {
    let mut data = vec![0.0; horizon * d * states * actions * states];
    let offset = |h: usize, i: usize, s: usize, a: usize| (((h * d + i) * states + s) * actions + a) * states;
    for h in 0..horizon {
        for s in 0..states {
            for a in 0..actions {
                loop {
                    let rows: Vec<Vec<f64>> = (0..d).map(|_| dirichlet_one(states, rng)).collect();
                    let ok = (0..states).all(|sn| rows.iter().map(|r| r[sn] * r[sn]).sum::<f64>() <= 1.0);
                    if ok {
                        for (i, r) in rows.iter().enumerate() {
                            let o = offset(h, i, s, a);
                            data[o..o + states].copy_from_slice(r);
                        }
                        break;
                    }
                }
            }
        }
    }
    MixtureFeatures::new(horizon, states, actions, d, data)
}

/// Random realizable game: Dirichlet(1) base kernels and `theta*`, uniform
/// rewards, uniform `rho` and reference policies.
pub fn generate_finite_game<R: Rng + ?Sized>(params: &GameGenParams, rng: &mut R) -> Result<FiniteMarkovGame> {
    params.validate()?;
    let space = JointActionSpace::new(vec![params.actions; params.players])?;
    let (hz, ns, na, np) = (params.horizon, params.states, space.size(), params.players);
    let features = Arc::new(random_features(hz, ns, na, params.d, rng)?);
    let theta: Vec<Vec<f64>> = (0..hz).map(|_| dirichlet_one(params.d, rng)).collect();
    let kernel = LinearMixtureKernel::new(features, theta)?;
    let mut r = Vec::with_capacity(hz * ns * na * np);
    for _ in 0..hz * ns * na {
        if params.zero_sum {
            let x: f64 = rng.random();
            r.extend([x, 1.0 - x]);
        } else {
            r.extend((0..np).map(|_| rng.random::<f64>()));
        }
    }
    let rewards = Rewards::new(hz, ns, na, np, r)?;
    let pi_ref = (0..np).map(|_| PlayerPolicy::uniform(hz, ns, params.actions)).collect();
    FiniteMarkovGame::new(space, rewards, kernel, Simplex::uniform(ns), pi_ref)
}

/// One observed transition at step `h` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub h: usize,
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
}

/// Rolls out `policy` for `H` steps from `s_1 ~ rho` under the true kernel.
pub fn sample_trajectory<R: Rng + ?Sized>(game: &FiniteMarkovGame, policy: &JointPolicy, rng: &mut R) -> Result<Trajectory> {
    check_len(game.horizon(), policy.horizon())?;
    check_len(game.states(), policy.states())?;
    check_len(game.space.size(), policy.space().size())?;
    let mut s = sample_index(game.rho.as_slice(), rng);
    let mut transitions = Vec::with_capacity(game.horizon());
    for h in 0..game.horizon() {
        let a = sample_index(policy.row(h, s), rng);
        let s_next = sample_index(game.table.row(h, s, a), rng);
        transitions.push(Transition { h, s, a, s_next });
        s = s_next;
    }
    Ok(Trajectory { transitions })
}

/// Gap of `policy` against best responses under the true kernel.
pub fn nash_gap(game: &FiniteMarkovGame, policy: &JointPolicy, beta: f64) -> Result<f64> {
    Ok(nash_gap_report(game, policy, beta)?.gap)
}

pub fn nash_gap_report(game: &FiniteMarkovGame, policy: &JointPolicy, beta: f64) -> Result<GapReport> {
    nash_gap_under(&game.table, &game.rewards, &game.rho, &game.pi_ref, policy, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_core::seeded_rng;

    #[test]
    fn generator_respects_invariants() {
        let mut rng = seeded_rng(3);
        let params = GameGenParams { players: 2, states: 4, actions: 2, horizon: 3, d: 4, zero_sum: false };
        let game = generate_finite_game(&params, &mut rng).unwrap();
        assert_eq!(game.space.size(), 4);
        let t = game.table();
        for h in 0..3 {
            for s in 0..4 {
                for a in 0..4 {
                    assert!((t.row(h, s, a).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
        let zs = GameGenParams { zero_sum: true, ..params.clone() };
        assert!(generate_finite_game(&zs, &mut rng).unwrap().rewards.is_constant_sum());
        let too_big = GameGenParams { states: 11, ..params };
        assert!(generate_finite_game(&too_big, &mut rng).is_err());
    }

    #[test]
    fn trajectory_replays() {
        let params = GameGenParams { players: 2, states: 3, actions: 2, horizon: 4, d: 2, zero_sum: false };
        let game = generate_finite_game(&params, &mut seeded_rng(1)).unwrap();
        let pi = JointPolicy::uniform(4, 3, &game.space);
        let a = sample_trajectory(&game, &pi, &mut seeded_rng(8)).unwrap();
        let b = sample_trajectory(&game, &pi, &mut seeded_rng(8)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.transitions.len(), 4);
        for w in a.transitions.windows(2) {
            assert_eq!(w[0].s_next, w[1].s);
        }
    }
}
