use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result, VmgError};
use crate::game_core::Simplex;
use crate::linalg::sample_index;
use crate::markov_env::{
    dirichlet_one, random_features, GameGenParams, JointActionSpace, JointPolicy, LinearMixtureKernel, PlayerPolicy,
    Rewards, TransitionTable,
};

/// Rollout cap of the sampler.
pub const SAMPLER_CAP: usize = 1_000_000;

/// Ground-truth discounted game with a homogeneous kernel. Rewards, kernel,
/// policies and references all use a single step (`h = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedMarkovGame {
    pub space: JointActionSpace,
    pub rewards: Rewards,
    pub kernel: LinearMixtureKernel,
    pub rho: Simplex,
    pub pi_ref: Vec<PlayerPolicy>,
    pub gamma: f64,
    table: TransitionTable,
}

impl DiscountedMarkovGame {
    pub fn new(
        space: JointActionSpace,
        rewards: Rewards,
        kernel: LinearMixtureKernel,
        rho: Simplex,
        pi_ref: Vec<PlayerPolicy>,
        gamma: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(VmgError::InvalidModel(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        check_len(1, kernel.horizon())?;
        check_len(1, rewards.horizon())?;
        let (ns, na) = (kernel.states(), kernel.actions());
        check_len(space.size(), na)?;
        check_len(ns, rewards.states())?;
        check_len(na, rewards.actions())?;
        check_len(space.players(), rewards.players())?;
        check_len(ns, rho.len())?;
        check_len(space.players(), pi_ref.len())?;
        for (n, r) in pi_ref.iter().enumerate() {
            check_len(1, r.horizon())?;
            check_len(ns, r.states())?;
            check_len(space.player_actions(n), r.actions())?;
        }
        let table = kernel.table();
        Ok(Self { space, rewards, kernel, rho, pi_ref, gamma, table })
    }

    pub fn players(&self) -> usize {
        self.space.players()
    }

    pub fn states(&self) -> usize {
        self.kernel.states()
    }

    pub fn d(&self) -> usize {
        self.kernel.d()
    }

    pub fn table(&self) -> &TransitionTable {
        &self.table
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscountedGenParams {
    pub players: usize,
    pub states: usize,
    pub actions: usize,
    pub d: usize,
    pub gamma: f64,
    #[serde(default)]
    pub zero_sum: bool,
}

/// Same construction as the finite-horizon generator with one homogeneous step.
pub fn generate_discounted_game<R: Rng + ?Sized>(params: &DiscountedGenParams, rng: &mut R) -> Result<DiscountedMarkovGame> {
    GameGenParams {
        players: params.players,
        states: params.states,
        actions: params.actions,
        horizon: 1,
        d: params.d,
        zero_sum: params.zero_sum,
    }
    .validate()?;
    if !(0.0..1.0).contains(&params.gamma) {
        return Err(VmgError::ConfigInvalid(format!("gamma must lie in [0, 1), got {}", params.gamma)));
    }
    let space = JointActionSpace::new(vec![params.actions; params.players])?;
    let (ns, na, np) = (params.states, space.size(), params.players);
    let features = Arc::new(random_features(1, ns, na, params.d, rng)?);
    let kernel = LinearMixtureKernel::new(features, vec![dirichlet_one(params.d, rng)])?;
    let mut r = Vec::with_capacity(ns * na * np);
    for _ in 0..ns * na {
        if params.zero_sum {
            let x: f64 = rng.random();
            r.extend([x, 1.0 - x]);
        } else {
            r.extend((0..np).map(|_| rng.random::<f64>()));
        }
    }
    let rewards = Rewards::new(1, ns, na, np, r)?;
    let pi_ref = (0..np).map(|_| PlayerPolicy::uniform(1, ns, params.actions)).collect();
    DiscountedMarkovGame::new(space, rewards, kernel, Simplex::uniform(ns), pi_ref, params.gamma)
}

/// `(s, a, s')` with `(s, a)` drawn from the discounted visitation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleTriple {
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
}

/// Geometric-stopping rollout; returns the triple and the rollout length `h + 1`.
pub fn sampler_traced<R: Rng + ?Sized>(
    table: &TransitionTable,
    policy: &JointPolicy,
    rho: &Simplex,
    gamma: f64,
    rng: &mut R,
) -> Result<(SampleTriple, usize)> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(VmgError::InvalidModel(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    check_len(table.states(), rho.len())?;
    check_len(table.actions(), policy.space().size())?;
    let mut s = sample_index(rho.as_slice(), rng);
    let mut a = sample_index(policy.row(0, s), rng);
    let mut h = 0;
    while rng.random::<f64>() < gamma {
        if h + 1 >= SAMPLER_CAP {
            return Err(VmgError::CapExceeded(SAMPLER_CAP));
        }
        s = sample_index(table.row(0, s, a), rng);
        a = sample_index(policy.row(0, s), rng);
        h += 1;
    }
    let s_next = sample_index(table.row(0, s, a), rng);
    Ok((SampleTriple { s, a, s_next }, h + 1))
}

/// One sampler call under the game's true kernel.
pub fn sampler<R: Rng + ?Sized>(
    game: &DiscountedMarkovGame,
    policy: &JointPolicy,
    rho: &Simplex,
    rng: &mut R,
) -> Result<SampleTriple> {
    Ok(sampler_traced(&game.table, policy, rho, game.gamma, rng)?.0)
}
