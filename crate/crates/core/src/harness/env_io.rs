//! Saved environments: a versioned JSON document holding everything needed
//! to rebuild a ground-truth model.

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VmgError};
use crate::game_core::{random_antisymmetric_model, random_payoff_model, FeatureTable, LinearPayoffModel, Simplex};
use crate::infinite_vmg::{generate_discounted_game, DiscountedGenParams, DiscountedMarkovGame};
use crate::linalg::norm2;
use crate::markov_env::{
    generate_finite_game, FiniteMarkovGame, GameGenParams, JointActionSpace, LinearMixtureKernel, MixtureFeatures,
    PlayerPolicy, Rewards,
};

pub const ENV_SCHEMA: &str = "vmg-env/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvBody {
    Matrix {
        m: usize,
        n: usize,
        d: usize,
        /// `[i][j][k]`
        features: Vec<f64>,
        omega: Vec<f64>,
        bound: f64,
    },
    /// Finite-horizon (`gamma` absent) or discounted (`horizon = 1`, `gamma` set) Markov game.
    Markov {
        action_sizes: Vec<usize>,
        horizon: usize,
        states: usize,
        d: usize,
        /// `[h][i][s][a][s']`
        features: Vec<f64>,
        theta: Vec<Vec<f64>>,
        /// `[h][s][a][n]`
        rewards: Vec<f64>,
        rho: Vec<f64>,
        /// Per player, `[h][s][a_n]`.
        pi_ref: Vec<Vec<f64>>,
        #[serde(default)]
        gamma: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvDocument {
    pub schema: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub env: EnvBody,
}

/// A rebuilt environment.
#[derive(Debug, Clone, PartialEq)]
pub enum Environment {
    Matrix(LinearPayoffModel),
    Finite(FiniteMarkovGame),
    Discounted(DiscountedMarkovGame),
}

impl EnvDocument {
    pub fn from_matrix(model: &LinearPayoffModel, seed: Option<u64>) -> Self {
        let f = &model.features;
        Self {
            schema: ENV_SCHEMA.into(),
            seed,
            env: EnvBody::Matrix {
                m: f.m(),
                n: f.n(),
                d: f.d(),
                features: f.as_slice().to_vec(),
                omega: model.omega.clone(),
                bound: model.bound,
            },
        }
    }

    fn markov_body(
        space: &JointActionSpace,
        kernel: &LinearMixtureKernel,
        rewards: &Rewards,
        rho: &Simplex,
        pi_ref: &[PlayerPolicy],
        gamma: Option<f64>,
    ) -> EnvBody {
        EnvBody::Markov {
            action_sizes: space.sizes().to_vec(),
            horizon: kernel.horizon(),
            states: kernel.states(),
            d: kernel.d(),
            features: kernel.features.as_slice().to_vec(),
            theta: kernel.theta.clone(),
            rewards: rewards.as_slice().to_vec(),
            rho: rho.as_slice().to_vec(),
            pi_ref: pi_ref.iter().map(|p| p.as_slice().to_vec()).collect(),
            gamma,
        }
    }

    pub fn from_finite(game: &FiniteMarkovGame, seed: Option<u64>) -> Self {
        let env = Self::markov_body(&game.space, &game.kernel, &game.rewards, &game.rho, &game.pi_ref, None);
        Self { schema: ENV_SCHEMA.into(), seed, env }
    }

    pub fn from_discounted(game: &DiscountedMarkovGame, seed: Option<u64>) -> Self {
        let env = Self::markov_body(&game.space, &game.kernel, &game.rewards, &game.rho, &game.pi_ref, Some(game.gamma));
        Self { schema: ENV_SCHEMA.into(), seed, env }
    }

    pub fn from_environment(env: &Environment, seed: Option<u64>) -> Self {
        match env {
            Environment::Matrix(m) => Self::from_matrix(m, seed),
            Environment::Finite(g) => Self::from_finite(g, seed),
            Environment::Discounted(g) => Self::from_discounted(g, seed),
        }
    }

    /// Rebuilds the environment through the validating constructors.
    pub fn build(&self) -> Result<Environment> {
        if self.schema != ENV_SCHEMA {
            return Err(VmgError::EnvInvalid(format!("schema {:?}, expected {ENV_SCHEMA:?}", self.schema)));
        }
        let wrap = |e: VmgError| VmgError::EnvInvalid(e.to_string());
        match &self.env {
            EnvBody::Matrix { m, n, d, features, omega, bound } => {
                let features = FeatureTable::new(*m, *n, *d, features.clone()).map_err(wrap)?;
                if norm2(omega) > (*d as f64).sqrt() + 1e-12 {
                    return Err(VmgError::EnvInvalid(format!("||omega|| exceeds sqrt(d) = {}", (*d as f64).sqrt())));
                }
                Ok(Environment::Matrix(LinearPayoffModel::new(features, omega.clone(), *bound).map_err(wrap)?))
            }
            EnvBody::Markov { action_sizes, horizon, states, d, features, theta, rewards, rho, pi_ref, gamma } => {
                let space = JointActionSpace::new(action_sizes.clone()).map_err(wrap)?;
                let na = space.size();
                let feats = MixtureFeatures::new(*horizon, *states, na, *d, features.clone()).map_err(wrap)?;
                let kernel = LinearMixtureKernel::new(Arc::new(feats), theta.clone()).map_err(wrap)?;
                let rewards =
                    Rewards::new(*horizon, *states, na, action_sizes.len(), rewards.clone()).map_err(wrap)?;
                let rho = Simplex::new(rho.clone()).map_err(wrap)?;
                if pi_ref.len() != action_sizes.len() {
                    return Err(VmgError::EnvInvalid(format!("{} reference policies for {} players", pi_ref.len(), action_sizes.len())));
                }
                let refs = pi_ref
                    .iter()
                    .zip(action_sizes)
                    .map(|(p, &an)| PlayerPolicy::new(*horizon, *states, an, p.clone()))
                    .collect::<Result<Vec<_>>>()
                    .map_err(wrap)?;
                match gamma {
                    None => Ok(Environment::Finite(FiniteMarkovGame::new(space, rewards, kernel, rho, refs).map_err(wrap)?)),
                    Some(g) => Ok(Environment::Discounted(
                        DiscountedMarkovGame::new(space, rewards, kernel, rho, refs, *g).map_err(wrap)?,
                    )),
                }
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| VmgError::EnvInvalid(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| VmgError::Io(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Environment kinds `gen-env` can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Matrix,
    Symmetric,
    MarkovFinite,
    MarkovInfinite,
}

impl std::str::FromStr for EnvKind {
    type Err = VmgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matrix" => Ok(EnvKind::Matrix),
            "symmetric" => Ok(EnvKind::Symmetric),
            "markov_finite" => Ok(EnvKind::MarkovFinite),
            "markov_infinite" => Ok(EnvKind::MarkovInfinite),
            other => Err(VmgError::ConfigInvalid(format!(
                "unknown environment kind {other:?}; expected matrix, symmetric, markov_finite or markov_infinite"
            ))),
        }
    }
}

/// Desk-scale default environment of each kind.
pub fn generate_env<R: Rng + ?Sized>(kind: EnvKind, rng: &mut R) -> Result<Environment> {
    Ok(match kind {
        EnvKind::Matrix => Environment::Matrix(random_payoff_model(10, 10, 5, rng)?),
        EnvKind::Symmetric => Environment::Matrix(random_antisymmetric_model(10, 5, rng)?),
        EnvKind::MarkovFinite => {
            let p = GameGenParams { players: 2, states: 4, actions: 2, horizon: 3, d: 4, zero_sum: false };
            Environment::Finite(generate_finite_game(&p, rng)?)
        }
        EnvKind::MarkovInfinite => {
            let p = DiscountedGenParams { players: 2, states: 4, actions: 2, d: 4, gamma: 0.9, zero_sum: false };
            Environment::Discounted(generate_discounted_game(&p, rng)?)
        }
    })
}

/// Re-checks a saved environment; returns a one-line description on success.
pub fn verify_env(doc: &EnvDocument) -> Result<String> {
    Ok(match doc.build()? {
        Environment::Matrix(m) => format!(
            "matrix environment: {}x{} actions, d = {}, max |A| = {:.4}, antisymmetry defect {:.2e}",
            m.m(),
            m.n(),
            m.d(),
            m.payoff_matrix().max_abs(),
            if m.m() == m.n() { m.features.antisymmetry_defect() } else { f64::NAN }
        ),
        Environment::Finite(g) => format!(
            "finite-horizon game: {} players, {} states, {} joint actions, H = {}, d = {}",
            g.players(),
            g.states(),
            g.space.size(),
            g.horizon(),
            g.d()
        ),
        Environment::Discounted(g) => format!(
            "discounted game: {} players, {} states, {} joint actions, gamma = {}, d = {}",
            g.players(),
            g.states(),
            g.space.size(),
            g.gamma,
            g.d()
        ),
    })
}
