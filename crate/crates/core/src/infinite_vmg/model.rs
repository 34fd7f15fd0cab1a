use std::sync::Arc;

use crate::error::{Result, VmgError};
use crate::game_core::Simplex;
use crate::linalg::dot;
use crate::markov_env::{JointPolicy, LinearMixtureKernel, MixtureFeatures, PlayerPolicy, Rewards, TransitionTable};
use crate::markov_vmg::{nll_grad, nll_loss, simplex_pgd, SimplexPgdOutcome, TransitionDataset, ValueTerm};
use crate::matrix_vmg::ModelOptSettings;

use super::eval::{discounted_best_response, discounted_values, discounted_visitation_exact};

/// Discounted model objective: pooled-triple likelihood plus weighted value terms.
#[derive(Debug, Clone)]
pub struct DiscountedModelProblem<'a> {
    pub features: &'a Arc<MixtureFeatures>,
    pub data: &'a TransitionDataset,
    pub policy: &'a JointPolicy,
    pub rho: &'a Simplex,
    pub beta: f64,
    pub gamma: f64,
    pub rewards: &'a Rewards,
    pub pi_ref: &'a [PlayerPolicy],
    pub terms: Vec<(f64, ValueTerm)>,
}

impl<'a> DiscountedModelProblem<'a> {
    /// `L(f) - alpha sum_n V*_{f,n}(rho)`.
    #[allow(clippy::too_many_arguments)]
    pub fn markov(
        features: &'a Arc<MixtureFeatures>,
        data: &'a TransitionDataset,
        policy: &'a JointPolicy,
        alpha: f64,
        rho: &'a Simplex,
        beta: f64,
        gamma: f64,
        rewards: &'a Rewards,
        pi_ref: &'a [PlayerPolicy],
    ) -> Self {
        let terms = if alpha == 0.0 {
            Vec::new()
        } else {
            (0..rewards.players()).map(|n| (-alpha, ValueTerm::BestResponse(n))).collect()
        };
        Self { features, data, policy, rho, beta, gamma, rewards, pi_ref, terms }
    }

    fn table(&self, theta: &[Vec<f64>]) -> Result<TransitionTable> {
        Ok(LinearMixtureKernel::new(Arc::clone(self.features), theta.to_vec())?.table())
    }

    /// Value of one term together with the policy it is evaluated at and its state values.
    fn term(&self, p: &TransitionTable, term: ValueTerm) -> Result<(f64, JointPolicy, Vec<f64>)> {
        match term {
            ValueTerm::BestResponse(n) => {
                let br = discounted_best_response(p, self.policy, n, self.beta, self.gamma, self.pi_ref, self.rewards)?;
                let dev = self.policy.deviate(n, &br.policy)?;
                Ok((br.value_at(self.rho), dev, br.values))
            }
            ValueTerm::OnPolicy(n) => {
                let v = discounted_values(p, self.policy, self.beta, self.pi_ref, self.rewards, self.gamma)?;
                Ok((v.value_at(self.rho, n), self.policy.clone(), v.player_values(n)))
            }
        }
    }

    pub fn objective(&self, theta: &[Vec<f64>]) -> Result<f64> {
        let mut total = nll_loss(self.features, theta, self.data)?;
        if !self.terms.is_empty() {
            let p = self.table(theta)?;
            for &(w, term) in &self.terms {
                total += w * self.term(&p, term)?.0;
            }
        }
        if total.is_finite() {
            Ok(total)
        } else {
            Err(VmgError::NonFiniteObjective)
        }
    }

    /// Envelope gradient: `dV(rho)/dtheta_i = gamma/(1-gamma) sum d(s,a) sum_s' phi_i(s'|s,a) V(s')`.
    pub fn objective_grad(&self, theta: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut total = nll_loss(self.features, theta, self.data)?;
        let mut grad = nll_grad(self.features, theta, self.data)?;
        if !self.terms.is_empty() {
            let p = self.table(theta)?;
            let (ns, na) = (p.states(), p.actions());
            let scale = self.gamma / (1.0 - self.gamma);
            for &(w, term) in &self.terms {
                let (value, policy, v) = self.term(&p, term)?;
                total += w * value;
                if scale == 0.0 {
                    continue;
                }
                let d = discounted_visitation_exact(&p, &policy, self.rho, self.gamma)?;
                for (i, gi) in grad[0].iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for s in 0..ns {
                        for a in 0..na {
                            let weight = d[s * na + a];
                            if weight != 0.0 {
                                acc += weight * dot(self.features.base_row(0, i, s, a), &v);
                            }
                        }
                    }
                    *gi += w * scale * acc;
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

pub fn discounted_model_update(
    problem: &DiscountedModelProblem,
    prev_theta: &[Vec<f64>],
    opt: &ModelOptSettings,
) -> Result<SimplexPgdOutcome> {
    simplex_pgd(prev_theta, opt, |t| problem.objective(t), |t| problem.objective_grad(t))
}
