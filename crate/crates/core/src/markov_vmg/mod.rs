//! Value-incentivized learning in finite-horizon Markov games: equilibria
//! under the current model, the regularized likelihood update, best
//! responses and data collection.

mod equilibrium;
mod model;
mod runner;

pub use equilibrium::{cce_violation, equilibrium, stage_cce, Equilibrium, EquilibriumMode, CCE_SLACK};
pub use model::{
    best_response_policies, markov_model_grad, markov_model_objective, markov_model_update, markov_opt_default,
    nll_grad, nll_loss, simplex_pgd, FiniteModelProblem, SimplexPgdOutcome, TransitionDataset, ValueTerm,
    PROB_FLOOR,
};
pub use runner::{run_vmg_markov, run_vmg_markov_detailed, MarkovRun, MarkovVmgConfig};

pub(crate) use equilibrium::solve_stage;
pub(crate) use runner::initial_theta;
