#![allow(dead_code)]

use rand::Rng;
use vmg_core::game_core::{RunRng, Simplex};
use vmg_core::linalg::Matrix;

pub fn random_matrix(rng: &mut RunRng, m: usize, n: usize) -> Matrix {
    Matrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_simplex(rng: &mut RunRng, n: usize) -> Simplex {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    Simplex::from_weights(w).unwrap()
}

pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-8);
    num / den
}

use vmg_core::markov_env::{JointActionSpace, JointPolicy, PlayerPolicy};

pub fn random_rows(rng: &mut RunRng, rows: usize, k: usize) -> Vec<f64> {
    (0..rows).flat_map(|_| random_simplex(rng, k).into_vec()).collect()
}

pub fn random_player_policy(rng: &mut RunRng, horizon: usize, states: usize, actions: usize) -> PlayerPolicy {
    PlayerPolicy::new(horizon, states, actions, random_rows(rng, horizon * states, actions)).unwrap()
}

pub fn random_product_policy(rng: &mut RunRng, horizon: usize, states: usize, space: &JointActionSpace) -> JointPolicy {
    let players: Vec<PlayerPolicy> =
        space.sizes().iter().map(|&an| random_player_policy(rng, horizon, states, an)).collect();
    JointPolicy::from_product(space, &players).unwrap()
}

pub fn random_joint_policy(rng: &mut RunRng, horizon: usize, states: usize, space: &JointActionSpace) -> JointPolicy {
    JointPolicy::new(horizon, states, space.clone(), random_rows(rng, horizon * states, space.size())).unwrap()
}

/// A deterministic policy that picks action `choice(h, s)`.
pub fn deterministic_policy(
    horizon: usize,
    states: usize,
    actions: usize,
    choice: impl Fn(usize, usize) -> usize,
) -> PlayerPolicy {
    let mut probs = vec![0.0; horizon * states * actions];
    for h in 0..horizon {
        for s in 0..states {
            probs[(h * states + s) * actions + choice(h, s)] = 1.0;
        }
    }
    PlayerPolicy::new(horizon, states, actions, probs).unwrap()
}
