//! Infinite-horizon discounted games: the geometric-stopping sampler, exact
//! discounted evaluation, the learning loop and the single-agent reductions.

mod eval;
mod game;
mod model;
mod runner;

pub use eval::{
    discounted_best_response, discounted_equilibrium, discounted_gap_under, discounted_nash_gap, discounted_values,
    discounted_visitation_exact, DiscountedBestResponse, DiscountedEquilibrium, DiscountedValues, EQ_VI_CAP, PI_CAP,
    PI_TOL,
};
pub use game::{
    generate_discounted_game, sampler, sampler_traced, DiscountedGenParams, DiscountedMarkovGame, SampleTriple,
    SAMPLER_CAP,
};
pub use model::{discounted_model_update, DiscountedModelProblem};
pub use runner::{
    run_vmg_infinite, run_vmg_infinite_detailed, run_vmg_mdp, run_vmg_mdp_detailed, DiscountedRun, MdpConfig,
    MdpEnv, MdpOption,
};
