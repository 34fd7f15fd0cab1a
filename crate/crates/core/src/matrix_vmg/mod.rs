//! Value-incentivized learning in two-player zero-sum matrix games, with the
//! symmetric and bandit reductions.

mod model;
mod runner;
mod solver;

pub use model::{
    model_objective, model_objective_grad, objective_grad_with, objective_with, update_model, update_model_with,
    ModelOptSettings, ModelUpdate, Regularizer,
};
pub use runner::{
    run_vmg_bandit, run_vmg_bandit_detailed, run_vmg_matrix, run_vmg_matrix_detailed, run_vmg_symmetric,
    run_vmg_symmetric_detailed, MatrixRun, MatrixVmgConfig, RoundState, ANTISYMMETRY_TOL,
};
pub use solver::{
    best_response_max, best_response_min, duality_gap, max_value, min_value, solve_matrix_ne,
    solve_matrix_ne_with, NeSolution, NeSolverSettings,
};

