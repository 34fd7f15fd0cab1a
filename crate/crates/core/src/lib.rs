//! Value-incentivized model-based learning in matrix and Markov games.
//!
//! Every run is driven by a seeded [`game_core::RunRng`] and reproduces
//! bit-for-bit. Independent runs may execute in parallel via [`par`].

pub mod error;
pub mod game_core;
pub mod harness;
pub mod infinite_vmg;
pub mod linalg;
pub mod markov_env;
pub mod markov_vmg;
pub mod matrix_vmg;
pub mod oracle;
pub mod par;
pub mod schedule;
pub mod trace;

pub use error::{Result, VmgError};
pub use schedule::{AlphaContext, AlphaSchedule};
pub use trace::{RegretTrace, RunDiagnostics};
