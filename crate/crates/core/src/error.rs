use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum VmgError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("KL divergence undefined: p[{index}] > 0 while q[{index}] = 0")]
    AbsoluteContinuityViolation { index: usize },

    #[error("non-finite input at position {index}")]
    NonFiniteInput { index: usize },

    #[error("invalid simplex: {0}")]
    InvalidSimplex(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("features are not antisymmetric: max |phi(i,j) + phi(j,i)| = {0:e}")]
    AsymmetricFeatures(f64),

    #[error("the bandit reduction requires beta > 0")]
    BetaZeroUnsupported,

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("policy puts mass on action {action} at state {state} where the reference policy is zero")]
    NonFiniteKl { state: usize, action: usize },

    #[error("transition at step {step} has zero likelihood under every model")]
    ZeroLikelihood { step: usize },

    #[error("linear program infeasible: {0}")]
    LpInfeasible(String),

    #[error("linear program failed: {0}")]
    LpFailure(String),

    #[error("linear system is singular")]
    SingularSystem,

    #[error("sampler exceeded the safety cap of {0} steps")]
    CapExceeded(usize),

    #[error("objective evaluated to a non-finite value")]
    NonFiniteObjective,

    #[error("search space of {0} deterministic policies is too large")]
    SpaceTooLarge(u128),

    #[error("trace has {len} rounds; at least {min} required")]
    TraceTooShort { len: usize, min: usize },

    #[error("cumulative regret is not positive at round {round}; slope undefined")]
    NonPositiveRegret { round: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("environment invalid: {0}")]
    EnvInvalid(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, VmgError>;

impl From<std::io::Error> for VmgError {
    fn from(e: std::io::Error) -> Self {
        VmgError::Io(e.to_string())
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(VmgError::DimensionMismatch { expected, actual })
    }
}

pub(crate) fn check_index(index: usize, size: usize) -> Result<()> {
    if index < size {
        Ok(())
    } else {
        Err(VmgError::IndexOutOfRange { index, size })
    }
}
