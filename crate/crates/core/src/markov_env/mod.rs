//! Finite-horizon general-sum Markov games with linear mixture kernels:
//! regularized evaluation, best responses, visitation, sampling and the gap.

mod dp;
mod game;
mod kernel;
mod policy;

pub use dp::{
    best_response_dp, evaluate_values, nash_gap_under, visitation, BestResponse, GapReport, ValueTable, Visitation,
};
pub use game::{
    generate_finite_game, nash_gap, nash_gap_report, sample_trajectory, FiniteMarkovGame, GameGenParams, Trajectory,
    Transition, MAX_HORIZON, MAX_PLAYERS, MAX_PLAYER_ACTIONS, MAX_STATES,
};
pub use kernel::{kernel_prob, LinearMixtureKernel, MixtureFeatures, Rewards, TransitionTable};
pub use policy::{JointActionSpace, JointPolicy, PlayerPolicy};

pub(crate) use dp::{kl_penalty, soft_improve};
pub(crate) use game::{dirichlet_one, random_features};
