//! The value-incentivized least-squares model update.

use serde::{Deserialize, Serialize};

use super::solver::{best_response_max, best_response_min};
use crate::error::{check_len, Result, VmgError};
use crate::game_core::{kl_divergence, project_ball, FeatureTable, MatrixDataset, RegGameSpec, Simplex};
use crate::linalg::{dot, log_sum_exp, norm2, Matrix};

/// Inner optimizer settings for the model update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelOptSettings {
    pub max_iters: usize,
    /// Stop once the projected-gradient mapping has norm at most this.
    pub grad_tol: f64,
    pub initial_step: f64,
    pub armijo_c: f64,
}

impl Default for ModelOptSettings {
    fn default() -> Self {
        Self { max_iters: 500, grad_tol: 1e-8, initial_step: 1.0, armijo_c: 1e-4 }
    }
}

impl ModelOptSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters >= 1
            && self.grad_tol > 0.0
            && self.initial_step > 0.0
            && self.initial_step.is_finite()
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0;
        if ok {
            Ok(())
        } else {
            Err(VmgError::ConfigInvalid(format!("invalid model optimizer settings {self:?}")))
        }
    }
}

/// Which value terms enter the model objective.
#[derive(Debug, Clone, Copy)]
pub enum Regularizer<'a> {
    /// `- alpha f^{*,nu}(A) + alpha f^{mu,*}(A)`
    TwoSided { mu: &'a Simplex, nu: &'a Simplex },
    /// `+ alpha f^{mu,*}(A)`, used when both players share one policy.
    MinPlayerOnly { mu: &'a Simplex },
}

/// `beta log sum_i r_i exp(p_i / beta)`, or `max_i p_i` when `beta = 0`.
fn soft_max_value(p: &[f64], reference: &[f64], beta: f64) -> f64 {
    if beta == 0.0 {
        return p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    let logits: Vec<f64> = p.iter().zip(reference).map(|(x, r)| r.ln() + x / beta).collect();
    beta * log_sum_exp(&logits)
}

/// `f^{*,nu}(A)` in closed form.
fn max_player_value(a: &Matrix, nu: &Simplex, spec: &RegGameSpec) -> Result<f64> {
    let soft = soft_max_value(&a.mul_vec(nu.as_slice()), spec.mu_ref.as_slice(), spec.beta);
    if spec.beta == 0.0 {
        return Ok(soft);
    }
    Ok(soft + spec.beta * kl_divergence(nu, &spec.nu_ref)?)
}

/// `f^{mu,*}(A)` in closed form.
fn min_player_value(a: &Matrix, mu: &Simplex, spec: &RegGameSpec) -> Result<f64> {
    let neg: Vec<f64> = a.vec_mul(mu.as_slice()).iter().map(|x| -x).collect();
    let soft = -soft_max_value(&neg, spec.nu_ref.as_slice(), spec.beta);
    if spec.beta == 0.0 {
        return Ok(soft);
    }
    Ok(soft - spec.beta * kl_divergence(mu, &spec.mu_ref)?)
}

fn check_shapes(features: &FeatureTable, omega: &[f64], reg: &Regularizer, spec: &RegGameSpec) -> Result<()> {
    check_len(features.d(), omega.len())?;
    check_len(features.m(), spec.m())?;
    check_len(features.n(), spec.n())?;
    match reg {
        Regularizer::TwoSided { mu, nu } => {
            check_len(features.m(), mu.len())?;
            check_len(features.n(), nu.len())
        }
        Regularizer::MinPlayerOnly { mu } => check_len(features.m(), mu.len()),
    }
}

/// Squared loss plus the chosen value regularizer, evaluated in closed form.
pub fn objective_with(
    features: &FeatureTable,
    omega: &[f64],
    data: &MatrixDataset,
    reg: &Regularizer,
    spec: &RegGameSpec,
    alpha: f64,
) -> Result<f64> {
    check_shapes(features, omega, reg, spec)?;
    let loss = data.squared_loss(omega);
    if alpha == 0.0 {
        return Ok(loss);
    }
    let a = features.payoff_matrix(omega);
    let value = match reg {
        Regularizer::TwoSided { mu, nu } => {
            -max_player_value(&a, nu, spec)? + min_player_value(&a, mu, spec)?
        }
        Regularizer::MinPlayerOnly { mu } => min_player_value(&a, mu, spec)?,
    };
    let total = loss + alpha * value;
    if total.is_finite() {
        Ok(total)
    } else {
        Err(VmgError::NonFiniteObjective)
    }
}

/// Gradient of [`objective_with`]; a subgradient at lowest-index vertices when `beta = 0`.
pub fn objective_grad_with(
    features: &FeatureTable,
    omega: &[f64],
    data: &MatrixDataset,
    reg: &Regularizer,
    spec: &RegGameSpec,
    alpha: f64,
) -> Result<Vec<f64>> {
    check_shapes(features, omega, reg, spec)?;
    let mut g = data.squared_loss_grad(omega);
    if alpha == 0.0 {
        return Ok(g);
    }
    let a = features.payoff_matrix(omega);
    let mut add = |w: f64, e: Vec<f64>| {
        for (x, y) in g.iter_mut().zip(e) {
            *x += w * y;
        }
    };
    match reg {
        Regularizer::TwoSided { mu, nu } => {
            let mu_tilde = best_response_max(&a, nu, spec)?;
            let nu_tilde = best_response_min(&a, mu, spec)?;
            add(-alpha, features.expected_feature(mu_tilde.as_slice(), nu.as_slice()));
            add(alpha, features.expected_feature(mu.as_slice(), nu_tilde.as_slice()));
        }
        Regularizer::MinPlayerOnly { mu } => {
            let nu_tilde = best_response_min(&a, mu, spec)?;
            add(alpha, features.expected_feature(mu.as_slice(), nu_tilde.as_slice()));
        }
    }
    Ok(g)
}

/// `sum (A_omega(i,j) - v)^2 - alpha f^{*,nu_t}(A_omega) + alpha f^{mu_t,*}(A_omega)`.
pub fn model_objective(
    features: &FeatureTable,
    omega: &[f64],
    data: &MatrixDataset,
    mu_t: &Simplex,
    nu_t: &Simplex,
    spec: &RegGameSpec,
    alpha: f64,
) -> Result<f64> {
    objective_with(features, omega, data, &Regularizer::TwoSided { mu: mu_t, nu: nu_t }, spec, alpha)
}

pub fn model_objective_grad(
    features: &FeatureTable,
    omega: &[f64],
    data: &MatrixDataset,
    mu_t: &Simplex,
    nu_t: &Simplex,
    spec: &RegGameSpec,
    alpha: f64,
) -> Result<Vec<f64>> {
    objective_grad_with(features, omega, data, &Regularizer::TwoSided { mu: mu_t, nu: nu_t }, spec, alpha)
}

/// Result of one model update.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelUpdate {
    pub omega: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit or the line search stalled.
    pub converged: bool,
}

/// Projected gradient descent on the ball `||omega|| <= sqrt(d)` with
/// backtracking, warm-started at `prev_omega`. Never increases the objective.
pub fn update_model_with(
    features: &FeatureTable,
    prev_omega: &[f64],
    data: &MatrixDataset,
    reg: &Regularizer,
    spec: &RegGameSpec,
    alpha: f64,
    opt: &ModelOptSettings,
) -> Result<ModelUpdate> {
    opt.validate()?;
    if !(alpha >= 0.0) {
        return Err(VmgError::ConfigInvalid(format!("alpha must be >= 0, got {alpha}")));
    }
    let radius = (features.d() as f64).sqrt();
    let mut x = prev_omega.to_vec();
    project_ball(&mut x, radius);
    let eval = |w: &[f64]| objective_with(features, w, data, reg, spec, alpha);
    let grad = |w: &[f64]| objective_grad_with(features, w, data, reg, spec, alpha);

    let mut fx = eval(&x)?;
    let mut gx = grad(&x)?;
    let mut step = opt.initial_step;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for it in 0..opt.max_iters {
        // Barzilai-Borwein trial step, safeguarded
        if let Some((px, pg)) = &prev {
            let s: Vec<f64> = x.iter().zip(px).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gx.iter().zip(pg).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 0.0 {
                step = (dot(&s, &s) / sy).clamp(1e-12, 1e12);
            } else {
                step = (step * 2.0).min(1e12);
            }
        }
        let mut accepted = None;
        while step >= 1e-20 {
            let mut trial: Vec<f64> = x.iter().zip(&gx).map(|(a, g)| a - step * g).collect();
            project_ball(&mut trial, radius);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let mapping = norm2(&moved) / step;
            if mapping <= opt.grad_tol {
                return Ok(ModelUpdate { omega: x, objective: fx, iterations: it, converged: true });
            }
            let ft = eval(&trial)?;
            if ft <= fx + opt.armijo_c * dot(&gx, &moved) {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((next, fnext)) = accepted else {
            return Ok(ModelUpdate { omega: x, objective: fx, iterations: it, converged: false });
        };
        let gnext = grad(&next)?;
        prev = Some((std::mem::replace(&mut x, next), std::mem::replace(&mut gx, gnext)));
        fx = fnext;
    }
    Ok(ModelUpdate { omega: x, objective: fx, iterations: opt.max_iters, converged: false })
}

/// Model update of the two-sided matrix game.
#[allow(clippy::too_many_arguments)]
pub fn update_model(
    features: &FeatureTable,
    prev_omega: &[f64],
    data: &MatrixDataset,
    mu_t: &Simplex,
    nu_t: &Simplex,
    spec: &RegGameSpec,
    alpha: f64,
    opt: &ModelOptSettings,
) -> Result<ModelUpdate> {
    update_model_with(features, prev_omega, data, &Regularizer::TwoSided { mu: mu_t, nu: nu_t }, spec, alpha, opt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_core::{random_payoff_model, reg_game_value, seeded_rng};
    use rand::Rng;

    #[test]
    fn alpha_zero_is_least_squares() {
        let f = FeatureTable::one_hot(2, 2);
        let mut data = MatrixDataset::new(&f);
        data.push(&f, 0, 1, 0.5).unwrap();
        let spec = RegGameSpec::uniform(1.0, 2, 2).unwrap();
        let u = Simplex::uniform(2);
        let w = [0.0, 0.25, 0.0, 0.0];
        let v = model_objective(&f, &w, &data, &u, &u, &spec, 0.0).unwrap();
        assert!((v - 0.0625).abs() < 1e-15);
        let g = model_objective_grad(&f, &w, &data, &u, &u, &spec, 0.0).unwrap();
        assert_eq!(g, vec![0.0, -0.5, 0.0, 0.0]);
        let exact = [0.0, 0.5, 0.0, 0.0];
        assert_eq!(model_objective(&f, &exact, &data, &u, &u, &spec, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn scalar_mean_recovered() {
        let f = FeatureTable::new(1, 1, 1, vec![1.0]).unwrap();
        let mut data = MatrixDataset::new(&f);
        data.push(&f, 0, 0, 3.0).unwrap();
        data.push(&f, 0, 0, 5.0).unwrap();
        let spec = RegGameSpec::uniform(0.0, 1, 1).unwrap();
        let u = Simplex::uniform(1);
        // the unit ball caps omega at 1 when d = 1; lift the cap with a wider table
        let upd = update_model(&f, &[0.0], &data, &u, &u, &spec, 0.0, &ModelOptSettings::default()).unwrap();
        assert!((upd.omega[0] - 1.0).abs() < 1e-12);

        let f2 = FeatureTable::new(1, 1, 16, {
            let mut v = vec![0.0; 16];
            v[0] = 1.0;
            v
        })
        .unwrap();
        let mut d2 = MatrixDataset::new(&f2);
        d2.push(&f2, 0, 0, 3.0).unwrap();
        d2.push(&f2, 0, 0, 5.0).unwrap();
        let upd = update_model(&f2, &[0.0; 16], &d2, &u, &u, &spec, 0.0, &ModelOptSettings::default()).unwrap();
        assert!((upd.omega[0] - 4.0).abs() < 1e-8, "{:?}", upd.omega);
        assert!(upd.converged);
    }

    #[test]
    fn empty_data_regularizer_matches_composition() {
        let mut rng = seeded_rng(7);
        for beta in [0.0, 0.3, 1.0] {
            let model = random_payoff_model(3, 4, 3, &mut rng).unwrap();
            let spec = RegGameSpec::uniform(beta, 3, 4).unwrap();
            let mu = Simplex::from_weights((0..3).map(|_| rng.random::<f64>() + 0.1).collect()).unwrap();
            let nu = Simplex::from_weights((0..4).map(|_| rng.random::<f64>() + 0.1).collect()).unwrap();
            let data = MatrixDataset::new(&model.features);
            let closed = model_objective(&model.features, &model.omega, &data, &mu, &nu, &spec, 1.0).unwrap();
            let a = model.payoff_matrix();
            let br_mu = best_response_max(&a, &nu, &spec).unwrap();
            let br_nu = best_response_min(&a, &mu, &spec).unwrap();
            let composed = -reg_game_value(&a, &br_mu, &nu, &spec).unwrap() + reg_game_value(&a, &mu, &br_nu, &spec).unwrap();
            assert!((closed - composed).abs() < 1e-10, "beta {beta}: {closed} vs {composed}");
        }
    }

    #[test]
    fn update_never_increases_objective() {
        let mut rng = seeded_rng(21);
        for _ in 0..10 {
            let model = random_payoff_model(3, 3, 4, &mut rng).unwrap();
            let f = &model.features;
            let mut data = MatrixDataset::new(f);
            for _ in 0..6 {
                let (i, j) = (rng.random_range(0..3), rng.random_range(0..3));
                data.push(f, i, j, rng.random_range(-1.0..1.0)).unwrap();
            }
            let spec = RegGameSpec::uniform(0.5, 3, 3).unwrap();
            let mu = Simplex::uniform(3);
            let nu = Simplex::point_mass(3, 1);
            let start = vec![0.1; 4];
            let before = model_objective(f, &start, &data, &mu, &nu, &spec, 3.0).unwrap();
            let upd = update_model(f, &start, &data, &mu, &nu, &spec, 3.0, &ModelOptSettings::default()).unwrap();
            assert!(upd.objective <= before + 1e-12);
            assert!(norm2(&upd.omega) <= 2.0 + 1e-12);
        }
    }
}
