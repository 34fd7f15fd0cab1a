//! Brute-force reference implementations for tests and acceptance runs. Nothing
//! here calls into the production solvers or their numerical kernels.

mod lp;
mod markov;

pub use lp::{exact_cce_lp, exact_ne_lp, max_deviation_gain, maximize, LpRow, LpSolution, NeLp, Relation};
pub use markov::{
    enumerate_deterministic_best_response, enumerate_deterministic_best_response_under, enumerated_nash_gap,
    finite_diff_grad, forward_value, iterate_policy_values, truncated_visitation, value_iteration, ENUMERATION_LIMIT,
};
