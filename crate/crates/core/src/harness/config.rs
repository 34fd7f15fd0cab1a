use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, VmgError};
use crate::game_core::NoiseKind;
use crate::infinite_vmg::MdpOption;
use crate::markov_vmg::{markov_opt_default, EquilibriumMode};
use crate::matrix_vmg::ModelOptSettings;
use crate::schedule::AlphaSchedule;

fn default_tol() -> f64 {
    1e-8
}

fn default_sigma() -> f64 {
    0.1
}

/// The environment an experiment runs on. Generated from `instance_seed`
/// unless `env` names a saved environment document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    Matrix {
        m: usize,
        n: usize,
        d: usize,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default)]
        noise: NoiseKind,
        #[serde(default)]
        instance_seed: u64,
        #[serde(default)]
        env: Option<PathBuf>,
    },
    Symmetric {
        m: usize,
        d: usize,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default)]
        noise: NoiseKind,
        #[serde(default)]
        instance_seed: u64,
        #[serde(default)]
        env: Option<PathBuf>,
    },
    /// One-hot arms; `means` fixes the arm values, otherwise they are drawn uniformly.
    Bandit {
        arms: usize,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default)]
        noise: NoiseKind,
        #[serde(default)]
        means: Option<Vec<f64>>,
        #[serde(default)]
        omega0: Option<Vec<f64>>,
        #[serde(default)]
        instance_seed: u64,
    },
    MarkovFinite {
        players: usize,
        states: usize,
        actions: usize,
        horizon: usize,
        d: usize,
        #[serde(default)]
        zero_sum: bool,
        #[serde(default)]
        instance_seed: u64,
        #[serde(default)]
        env: Option<PathBuf>,
    },
    MarkovInfinite {
        players: usize,
        states: usize,
        actions: usize,
        d: usize,
        gamma: f64,
        #[serde(default)]
        zero_sum: bool,
        #[serde(default)]
        instance_seed: u64,
        #[serde(default)]
        env: Option<PathBuf>,
    },
    /// Single-agent reduction; episodic when `horizon` is set, discounted when `gamma` is.
    Mdp {
        states: usize,
        actions: usize,
        d: usize,
        #[serde(default)]
        horizon: Option<usize>,
        #[serde(default)]
        gamma: Option<f64>,
        option: MdpOption,
        #[serde(default)]
        instance_seed: u64,
        #[serde(default)]
        env: Option<PathBuf>,
    },
}

impl InstanceSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            InstanceSpec::Matrix { .. } => "matrix",
            InstanceSpec::Symmetric { .. } => "symmetric",
            InstanceSpec::Bandit { .. } => "bandit",
            InstanceSpec::MarkovFinite { .. } => "markov_finite",
            InstanceSpec::MarkovInfinite { .. } => "markov_infinite",
            InstanceSpec::Mdp { .. } => "mdp",
        }
    }

    pub fn env_path(&self) -> Option<&Path> {
        match self {
            InstanceSpec::Matrix { env, .. }
            | InstanceSpec::Symmetric { env, .. }
            | InstanceSpec::MarkovFinite { env, .. }
            | InstanceSpec::MarkovInfinite { env, .. }
            | InstanceSpec::Mdp { env, .. } => env.as_deref(),
            InstanceSpec::Bandit { .. } => None,
        }
    }

    fn is_markov(&self) -> bool {
        matches!(self, InstanceSpec::MarkovFinite { .. } | InstanceSpec::MarkovInfinite { .. } | InstanceSpec::Mdp { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub alpha_schedule: AlphaSchedule,
    pub rounds: usize,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    /// Inner optimizer; the module default for the experiment kind when absent.
    #[serde(default)]
    pub model_opt: Option<ModelOptSettings>,
    /// Equilibrium notion for Markov-game kinds.
    #[serde(default)]
    pub mode: Option<EquilibriumMode>,
    #[serde(default)]
    pub record_wallclock: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub algorithm: AlgorithmSpec,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Worker count; `VMG_THREADS` takes precedence.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn invalid(msg: impl Into<String>) -> VmgError {
    VmgError::ConfigInvalid(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn model_opt(&self) -> ModelOptSettings {
        self.algorithm.model_opt.clone().unwrap_or_else(|| {
            if self.instance.is_markov() {
                markov_opt_default()
            } else {
                ModelOptSettings::default()
            }
        })
    }

    pub fn mode(&self) -> EquilibriumMode {
        self.algorithm.mode.unwrap_or(EquilibriumMode::GeneralCce)
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.algorithm;
        if self.seeds.is_empty() {
            return Err(invalid("seeds must not be empty"));
        }
        if a.rounds < 1 {
            return Err(invalid("rounds must be >= 1"));
        }
        if !(a.solver_tol > 0.0) {
            return Err(invalid("solver_tol must be > 0"));
        }
        if !(a.beta >= 0.0) || !a.beta.is_finite() {
            return Err(invalid(format!("beta must be finite and >= 0, got {}", a.beta)));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads must be >= 1"));
        }
        a.alpha_schedule.validate()?;
        if let Some(opt) = &a.model_opt {
            opt.validate()?;
        }
        let positive = |name: &str, v: usize| if v == 0 { Err(invalid(format!("{name} must be >= 1"))) } else { Ok(()) };
        let sigma_ok = |s: f64| {
            if s >= 0.0 && s.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("sigma must be finite and >= 0, got {s}")))
            }
        };
        match &self.instance {
            InstanceSpec::Matrix { m, n, d, sigma, .. } => {
                positive("m", *m)?;
                positive("n", *n)?;
                positive("d", *d)?;
                sigma_ok(*sigma)?;
            }
            InstanceSpec::Symmetric { m, d, sigma, .. } => {
                positive("m", *m)?;
                positive("d", *d)?;
                sigma_ok(*sigma)?;
            }
            InstanceSpec::Bandit { arms, sigma, means, omega0, .. } => {
                positive("arms", *arms)?;
                sigma_ok(*sigma)?;
                if a.beta == 0.0 {
                    return Err(invalid("the bandit reduction requires beta > 0"));
                }
                for v in [means, omega0].into_iter().flatten() {
                    if v.len() != *arms {
                        return Err(invalid(format!("expected {arms} arm values, got {}", v.len())));
                    }
                }
            }
            InstanceSpec::MarkovFinite { .. } | InstanceSpec::MarkovInfinite { .. } => {
                if self.mode() == EquilibriumMode::GeneralCce && a.beta != 0.0 {
                    return Err(invalid("general_cce requires beta = 0"));
                }
            }
            InstanceSpec::Mdp { horizon, gamma, .. } => {
                if horizon.is_some() == gamma.is_some() {
                    return Err(invalid("mdp needs exactly one of horizon or gamma"));
                }
            }
        }
        if let InstanceSpec::MarkovInfinite { gamma, .. } | InstanceSpec::Mdp { gamma: Some(gamma), .. } = &self.instance {
            if !(0.0..1.0).contains(gamma) {
                return Err(invalid(format!("gamma must lie in [0, 1), got {gamma}")));
            }
        }
        Ok(())
    }
}
