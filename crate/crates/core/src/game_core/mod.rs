//! Shared primitives: simplex policies, KL divergence, linear payoff models,
//! the noisy feedback oracle and seeded randomness.

mod payoff;
mod simplex;

pub use payoff::{
    noisy_query, payoff_entry, project_ball, reg_game_value, FeatureTable, LinearPayoffModel,
    MatrixDataset, NoiseKind, NoiseOracle, RegGameSpec, MIN_REF_ENTRY,
};
pub use simplex::{kl_divergence, project_simplex, Simplex, SIMPLEX_TOL};

pub(crate) use simplex::project_simplex_into;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::linalg::norm2;

/// The RNG used for every run. Streams are owned per run and never shared.
pub type RunRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> RunRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random realizable payoff model: Gaussian features scaled into the unit
/// ball, and `omega*` uniform in the ball of radius `sqrt(d)`.
pub fn random_payoff_model<R: Rng + ?Sized>(m: usize, n: usize, d: usize, rng: &mut R) -> Result<LinearPayoffModel> {
    let mut data = Vec::with_capacity(m * n * d);
    for _ in 0..m * n {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        // radius uniform in [0.5, 1] keeps entries well spread
        let r: f64 = rng.random_range(0.5..=1.0);
        let s = norm2(&v).max(f64::MIN_POSITIVE);
        data.extend(v.iter().map(|x| r * x / s));
    }
    let features = FeatureTable::new(m, n, d, data)?;
    let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let s = norm2(&dir).max(f64::MIN_POSITIVE);
    let radius = (d as f64).sqrt() * rng.random::<f64>().powf(1.0 / d as f64);
    let omega: Vec<f64> = dir.iter().map(|x| radius * x / s).collect();
    let bound = (d as f64).sqrt();
    LinearPayoffModel::new(features, omega, bound)
}

/// Random antisymmetric features: `phi(i, j) = -phi(j, i)`, `phi(i, i) = 0`.
pub fn random_antisymmetric_model<R: Rng + ?Sized>(m: usize, d: usize, rng: &mut R) -> Result<LinearPayoffModel> {
    let mut data = vec![0.0; m * m * d];
    for i in 0..m {
        for j in (i + 1)..m {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            let s = norm2(&v).max(f64::MIN_POSITIVE);
            for k in 0..d {
                data[(i * m + j) * d + k] = v[k] / s;
                data[(j * m + i) * d + k] = -v[k] / s;
            }
        }
    }
    let features = FeatureTable::new(m, m, d, data)?;
    let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let s = norm2(&dir).max(f64::MIN_POSITIVE);
    let omega: Vec<f64> = dir.iter().map(|x| x / s).collect();
    LinearPayoffModel::new(features, omega, (d as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_models_satisfy_invariants() {
        let mut rng = seeded_rng(4);
        for _ in 0..20 {
            let model = random_payoff_model(4, 3, 5, &mut rng).unwrap();
            assert!(norm2(&model.omega) <= (5f64).sqrt() + 1e-12);
            assert!(model.payoff_matrix().max_abs() <= model.bound);
        }
        let anti = random_antisymmetric_model(4, 3, &mut rng).unwrap();
        assert_eq!(anti.features.antisymmetry_defect(), 0.0);
    }
}
