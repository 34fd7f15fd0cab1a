//! Likelihood, value-regularized model objective and its simplex-constrained optimizer.

use serde::{Deserialize, Serialize};

use crate::error::{check_index, check_len, Result, VmgError};
use crate::game_core::{project_simplex_into, Simplex};
use crate::linalg::{dot, norm2};
use crate::markov_env::{
    best_response_dp, evaluate_values, visitation, BestResponse, JointPolicy, LinearMixtureKernel, MixtureFeatures,
    PlayerPolicy, Rewards, Trajectory, Transition, TransitionTable,
};
use crate::matrix_vmg::ModelOptSettings;

/// Probability floor inside the log-likelihood.
pub const PROB_FLOOR: f64 = 1e-12;

/// Observed transitions per step, with dense counts `[h][s][a][s']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionDataset {
    horizon: usize,
    states: usize,
    actions: usize,
    transitions: Vec<Transition>,
    counts: Vec<f64>,
}

impl TransitionDataset {
    pub fn new(horizon: usize, states: usize, actions: usize) -> Self {
        Self { horizon, states, actions, transitions: Vec::new(), counts: vec![0.0; horizon * states * actions * states] }
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        check_index(t.h, self.horizon)?;
        check_index(t.s, self.states)?;
        check_index(t.a, self.actions)?;
        check_index(t.s_next, self.states)?;
        self.counts[((t.h * self.states + t.s) * self.actions + t.a) * self.states + t.s_next] += 1.0;
        self.transitions.push(t);
        Ok(())
    }

    pub fn extend(&mut self, traj: &Trajectory) -> Result<()> {
        traj.transitions.iter().try_for_each(|t| self.push(*t))
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Observed `(h, s, a, s', count)` cells.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, usize, usize, f64)> + '_ {
        let (ns, na) = (self.states, self.actions);
        self.counts.iter().enumerate().filter(|(_, c)| **c > 0.0).map(move |(k, &c)| {
            let sn = k % ns;
            let a = (k / ns) % na;
            let s = (k / (ns * na)) % ns;
            let h = k / (ns * na * ns);
            (h, s, a, sn, c)
        })
    }
}

fn check_data(features: &MixtureFeatures, theta: &[Vec<f64>], data: &TransitionDataset) -> Result<()> {
    check_len(features.horizon(), theta.len())?;
    check_len(features.horizon(), data.horizon)?;
    check_len(features.states(), data.states)?;
    check_len(features.actions(), data.actions)?;
    for t in theta {
        check_len(features.d(), t.len())?;
    }
    Ok(())
}

/// `sum_h sum_{(s,a,s') in D_h} -log max(P_h(s'|s,a), floor)`.
pub fn nll_loss(features: &MixtureFeatures, theta: &[Vec<f64>], data: &TransitionDataset) -> Result<f64> {
    check_data(features, theta, data)?;
    let mut total = 0.0;
    for (h, s, a, sn, c) in data.cells() {
        let phi: Vec<f64> = (0..features.d()).map(|i| features.base_row(h, i, s, a)[sn]).collect();
        if phi.iter().all(|x| *x == 0.0) {
            return Err(VmgError::ZeroLikelihood { step: h });
        }
        total -= c * dot(&phi, &theta[h]).max(PROB_FLOOR).ln();
    }
    Ok(total)
}

/// Gradient of [`nll_loss`] with respect to each `theta_h`.
pub fn nll_grad(features: &MixtureFeatures, theta: &[Vec<f64>], data: &TransitionDataset) -> Result<Vec<Vec<f64>>> {
    check_data(features, theta, data)?;
    let d = features.d();
    let mut g = vec![vec![0.0; d]; theta.len()];
    for (h, s, a, sn, c) in data.cells() {
        let phi: Vec<f64> = (0..d).map(|i| features.base_row(h, i, s, a)[sn]).collect();
        let p = dot(&phi, &theta[h]);
        if p < PROB_FLOOR {
            continue;
        }
        for i in 0..d {
            g[h][i] -= c * phi[i] / p;
        }
    }
    Ok(g)
}

/// One value term of the model objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueTerm {
    /// `V^{*, pi^{-n}}_{f,n}(rho)`
    BestResponse(usize),
    /// `V^{pi}_{f,n}(rho)`
    OnPolicy(usize),
}

/// Everything the finite-horizon model objective depends on besides `theta`.
#[derive(Debug, Clone)]
pub struct FiniteModelProblem<'a> {
    pub features: &'a std::sync::Arc<MixtureFeatures>,
    pub data: &'a TransitionDataset,
    pub policy: &'a JointPolicy,
    pub rho: &'a Simplex,
    pub beta: f64,
    pub rewards: &'a Rewards,
    pub pi_ref: &'a [PlayerPolicy],
    /// `(weight, term)` pairs added to the likelihood.
    pub terms: Vec<(f64, ValueTerm)>,
}

impl<'a> FiniteModelProblem<'a> {
    /// The two-sided objective `L(f) - alpha sum_n V*_{f,n}(rho)`.
    #[allow(clippy::too_many_arguments)]
    pub fn markov(
        features: &'a std::sync::Arc<MixtureFeatures>,
        data: &'a TransitionDataset,
        policy: &'a JointPolicy,
        alpha: f64,
        rho: &'a Simplex,
        beta: f64,
        rewards: &'a Rewards,
        pi_ref: &'a [PlayerPolicy],
    ) -> Self {
        let terms = if alpha == 0.0 {
            Vec::new()
        } else {
            (0..rewards.players()).map(|n| (-alpha, ValueTerm::BestResponse(n))).collect()
        };
        Self { features, data, policy, rho, beta, rewards, pi_ref, terms }
    }

    fn table(&self, theta: &[Vec<f64>]) -> Result<TransitionTable> {
        Ok(LinearMixtureKernel::new(std::sync::Arc::clone(self.features), theta.to_vec())?.table())
    }

    pub fn objective(&self, theta: &[Vec<f64>]) -> Result<f64> {
        let mut total = nll_loss(self.features, theta, self.data)?;
        if self.terms.is_empty() {
            return Ok(total);
        }
        let p = self.table(theta)?;
        for &(w, term) in &self.terms {
            let v = match term {
                ValueTerm::BestResponse(n) => {
                    best_response_dp(&p, self.policy, n, self.beta, self.pi_ref, self.rewards)?.value_at(self.rho)
                }
                ValueTerm::OnPolicy(n) => {
                    evaluate_values(&p, self.policy, self.beta, self.pi_ref, self.rewards)?.value_at(self.rho, n)
                }
            };
            total += w * v;
        }
        if total.is_finite() {
            Ok(total)
        } else {
            Err(VmgError::NonFiniteObjective)
        }
    }

    /// Objective and gradient; value terms are differentiated through the
    /// kernel with the best responses held fixed.
    pub fn objective_grad(&self, theta: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut total = nll_loss(self.features, theta, self.data)?;
        let mut grad = nll_grad(self.features, theta, self.data)?;
        if self.terms.is_empty() {
            return Ok((total, grad));
        }
        let p = self.table(theta)?;
        let (hz, ns) = (p.horizon(), p.states());
        for &(w, term) in &self.terms {
            let (value, policy, next_value): (f64, JointPolicy, Box<dyn Fn(usize, usize) -> f64>) = match term {
                ValueTerm::BestResponse(n) => {
                    let br: BestResponse = best_response_dp(&p, self.policy, n, self.beta, self.pi_ref, self.rewards)?;
                    let dev = self.policy.deviate(n, &br.policy)?;
                    (br.value_at(self.rho), dev, Box::new(move |h, s| br.value(h, s)))
                }
                ValueTerm::OnPolicy(n) => {
                    let t = evaluate_values(&p, self.policy, self.beta, self.pi_ref, self.rewards)?;
                    (t.value_at(self.rho, n), self.policy.clone(), Box::new(move |h, s| t.v(h, s, n)))
                }
            };
            total += w * value;
            let vis = visitation(&p, &policy, self.rho)?;
            for h in 0..hz {
                let v_next: Vec<f64> = (0..ns).map(|s| next_value(h + 1, s)).collect();
                for (i, gi) in grad[h].iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for s in 0..ns {
                        for a in 0..p.actions() {
                            let weight = vis.get(h, s, a);
                            if weight != 0.0 {
                                acc += weight * dot(self.features.base_row(h, i, s, a), &v_next);
                            }
                        }
                    }
                    *gi += w * acc;
                }
            }
        }
        if total.is_finite() {
            Ok((total, grad))
        } else {
            Err(VmgError::NonFiniteObjective)
        }
    }
}

/// `L_t(f) - alpha sum_n V^{*, pi_t^{-n}}_{f,n}(rho)`.
#[allow(clippy::too_many_arguments)]
pub fn markov_model_objective(
    features: &std::sync::Arc<MixtureFeatures>,
    theta: &[Vec<f64>],
    data: &TransitionDataset,
    pi_t: &JointPolicy,
    alpha: f64,
    rho: &Simplex,
    beta: f64,
    rewards: &Rewards,
    pi_ref: &[PlayerPolicy],
) -> Result<f64> {
    FiniteModelProblem::markov(features, data, pi_t, alpha, rho, beta, rewards, pi_ref).objective(theta)
}

#[allow(clippy::too_many_arguments)]
pub fn markov_model_grad(
    features: &std::sync::Arc<MixtureFeatures>,
    theta: &[Vec<f64>],
    data: &TransitionDataset,
    pi_t: &JointPolicy,
    alpha: f64,
    rho: &Simplex,
    beta: f64,
    rewards: &Rewards,
    pi_ref: &[PlayerPolicy],
) -> Result<Vec<Vec<f64>>> {
    Ok(FiniteModelProblem::markov(features, data, pi_t, alpha, rho, beta, rewards, pi_ref).objective_grad(theta)?.1)
}

/// Result of a simplex-constrained minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPgdOutcome {
    pub theta: Vec<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Projected gradient descent with every block on its own simplex,
/// Barzilai-Borwein trial steps and Armijo backtracking. Monotone.
pub fn simplex_pgd(
    theta0: &[Vec<f64>],
    opt: &ModelOptSettings,
    eval: impl Fn(&[Vec<f64>]) -> Result<f64>,
    eval_grad: impl Fn(&[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)>,
) -> Result<SimplexPgdOutcome> {
    opt.validate()?;
    let project = |x: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> { x.iter().map(|b| project_simplex_into(b)).collect() };
    let flat = |x: &[Vec<f64>]| -> Vec<f64> { x.iter().flatten().copied().collect() };
    let mut x = project(theta0)?;
    let (mut fx, mut gx) = eval_grad(&x)?;
    let mut step = opt.initial_step;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for it in 0..opt.max_iters {
        if let Some((px, pg)) = &prev {
            let s: Vec<f64> = flat(&x).iter().zip(px).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = flat(&gx).iter().zip(pg).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            step = if sy > 0.0 { (dot(&s, &s) / sy).clamp(1e-12, 1e12) } else { (step * 2.0).min(1e12) };
        }
        let mut accepted = None;
        while step >= 1e-20 {
            let raw: Vec<Vec<f64>> =
                x.iter().zip(&gx).map(|(b, g)| b.iter().zip(g).map(|(v, d)| v - step * d).collect()).collect();
            let trial = project(&raw)?;
            let moved: Vec<f64> = flat(&trial).iter().zip(flat(&x)).map(|(a, b)| a - b).collect();
            if norm2(&moved) / step <= opt.grad_tol {
                return Ok(SimplexPgdOutcome { theta: x, objective: fx, iterations: it, converged: true });
            }
            let ft = eval(&trial)?;
            if ft <= fx + opt.armijo_c * dot(&flat(&gx), &moved) {
                accepted = Some(trial);
                break;
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            return Ok(SimplexPgdOutcome { theta: x, objective: fx, iterations: it, converged: false });
        };
        let (fnext, gnext) = eval_grad(&next)?;
        prev = Some((flat(&x), flat(&gx)));
        x = next;
        gx = gnext;
        fx = fnext;
    }
    Ok(SimplexPgdOutcome { theta: x, objective: fx, iterations: opt.max_iters, converged: false })
}

/// Default optimizer settings for Markov model updates.
pub fn markov_opt_default() -> ModelOptSettings {
    ModelOptSettings { max_iters: 300, ..ModelOptSettings::default() }
}

/// Minimizes a [`FiniteModelProblem`] from `prev_theta`.
pub fn markov_model_update(
    problem: &FiniteModelProblem,
    prev_theta: &[Vec<f64>],
    opt: &ModelOptSettings,
) -> Result<SimplexPgdOutcome> {
    simplex_pgd(prev_theta, opt, |t| problem.objective(t), |t| problem.objective_grad(t))
}

/// `pi~^n = argmax_pi V^{pi, pi_t^{-n}}_{f,n}(rho)` for every player.
pub fn best_response_policies(
    p: &TransitionTable,
    pi_t: &JointPolicy,
    beta: f64,
    pi_ref: &[PlayerPolicy],
    rewards: &Rewards,
) -> Result<Vec<BestResponse>> {
    (0..rewards.players()).map(|n| best_response_dp(p, pi_t, n, beta, pi_ref, rewards)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn one_step_features() -> Arc<MixtureFeatures> {
        // 2 states, 1 action, d = 2: base 0 stays, base 1 swaps
        Arc::new(MixtureFeatures::new(1, 2, 1, 2, vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap())
    }

    #[test]
    fn nll_examples() {
        let f = one_step_features();
        let mut data = TransitionDataset::new(1, 2, 1);
        assert_eq!(nll_loss(&f, &[vec![1.0, 0.0]], &data).unwrap(), 0.0);
        data.push(Transition { h: 0, s: 0, a: 0, s_next: 0 }).unwrap();
        assert_eq!(nll_loss(&f, &[vec![1.0, 0.0]], &data).unwrap(), 0.0);
        data.push(Transition { h: 0, s: 1, a: 0, s_next: 0 }).unwrap();
        let mut two = TransitionDataset::new(1, 2, 1);
        two.push(Transition { h: 0, s: 0, a: 0, s_next: 1 }).unwrap();
        two.push(Transition { h: 0, s: 1, a: 0, s_next: 0 }).unwrap();
        let v = nll_loss(&f, &[vec![0.5, 0.5]], &two).unwrap();
        assert!((v - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((v - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn zero_likelihood_is_reported() {
        let f = Arc::new(MixtureFeatures::new(1, 2, 1, 1, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let mut data = TransitionDataset::new(1, 2, 1);
        data.push(Transition { h: 0, s: 0, a: 0, s_next: 1 }).unwrap();
        assert_eq!(nll_loss(&f, &[vec![1.0]], &data), Err(VmgError::ZeroLikelihood { step: 0 }));
    }

    #[test]
    fn pgd_fits_mixture_weight() {
        let f = one_step_features();
        let mut data = TransitionDataset::new(1, 2, 1);
        // from state 0: 3 stays, 1 move; the MLE weight on staying is 0.75
        for sn in [0, 0, 0, 1] {
            data.push(Transition { h: 0, s: 0, a: 0, s_next: sn }).unwrap();
        }
        let nll = |t: &[Vec<f64>]| nll_loss(&f, t, &data);
        let both = |t: &[Vec<f64>]| Ok((nll_loss(&f, t, &data)?, nll_grad(&f, t, &data)?));
        let out = simplex_pgd(&[vec![0.5, 0.5]], &markov_opt_default(), nll, both).unwrap();
        assert!((out.theta[0][0] - 0.75).abs() < 1e-6, "{:?}", out.theta);
    }
}
