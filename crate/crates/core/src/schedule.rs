//! Choice of the value-regularization weight `alpha`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VmgError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaSchedule {
    /// The theory-driven weight for the problem class, with confidence `delta`.
    PaperFormula { delta: f64 },
    Constant { value: f64 },
    /// Greedy maximum-likelihood ablation.
    Zero,
}

/// Problem quantities the theory-driven weight depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaContext {
    Matrix { rounds: usize, dim: usize },
    Episodic { rounds: usize, dim: usize, horizon: usize, players: usize, states: usize },
    Discounted { rounds: usize, dim: usize, players: usize, states: usize, gamma: f64 },
}

impl AlphaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AlphaSchedule::PaperFormula { delta } if !(delta > 0.0 && delta < 1.0) => {
                Err(VmgError::ConfigInvalid(format!("delta must lie in (0, 1), got {delta}")))
            }
            AlphaSchedule::Constant { value } if !(value >= 0.0) || !value.is_finite() => {
                Err(VmgError::ConfigInvalid(format!("alpha must be finite and >= 0, got {value}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, AlphaSchedule::Zero) || matches!(self, AlphaSchedule::Constant { value } if *value == 0.0)
    }

    pub fn value(&self, ctx: AlphaContext) -> Result<f64> {
        self.validate()?;
        let delta = match *self {
            AlphaSchedule::Zero => return Ok(0.0),
            AlphaSchedule::Constant { value } => return Ok(value),
            AlphaSchedule::PaperFormula { delta } => delta,
        };
        let alpha = match ctx {
            AlphaContext::Matrix { rounds, dim } => {
                let t = rounds as f64;
                let d = dim as f64;
                let denom = d * (1.0 + (t / d).powf(1.5)).ln();
                (t / denom * ((4.0 * t / delta).ln() + d * (d * t).ln())).sqrt()
            }
            AlphaContext::Episodic { rounds, dim, horizon, players, states } => {
                let t = rounds as f64;
                let d = dim as f64;
                let h = horizon as f64;
                let n = players as f64;
                let s = states as f64;
                let denom = h * d * (1.0 + t.powf(1.5) * h * h / d.sqrt()).ln();
                (t / denom * ((h * n / delta).ln() + d * (d * s * t).ln())).sqrt()
            }
            AlphaContext::Discounted { rounds, dim, players, states, gamma } => {
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(VmgError::ConfigInvalid(format!(
                        "the discounted alpha formula needs gamma in (0, 1), got {gamma}; use a constant alpha"
                    )));
                }
                let t = rounds as f64;
                let d = dim as f64;
                let n = players as f64;
                let s = states as f64;
                let one_minus = 1.0 - gamma;
                let denom = d * (1.0 + t.powf(1.5) / (one_minus * one_minus * d.sqrt())).ln();
                let inner = ((n / delta).ln() + d * (d * s * t).ln()) / denom * t;
                one_minus.powf(1.5) / gamma * inner.sqrt()
            }
        };
        if alpha.is_finite() && alpha >= 0.0 {
            Ok(alpha)
        } else {
            Err(VmgError::ConfigInvalid(format!("alpha formula produced {alpha} for {ctx:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_formula_by_hand() {
        // T = 2000, d = 5, delta = 0.05
        let t: f64 = 2000.0;
        let d: f64 = 5.0;
        let expected = (t / (d * (1.0 + (t / d).powf(1.5)).ln()) * ((4.0 * t / 0.05).ln() + d * (d * t).ln())).sqrt();
        let got = AlphaSchedule::PaperFormula { delta: 0.05 }
            .value(AlphaContext::Matrix { rounds: 2000, dim: 5 })
            .unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 50.8).abs() < 0.5, "{got}");
    }

    #[test]
    fn episodic_formula_grows_like_sqrt_t() {
        let s = AlphaSchedule::PaperFormula { delta: 0.05 };
        let a = |t| s.value(AlphaContext::Episodic { rounds: t, dim: 4, horizon: 3, players: 2, states: 4 }).unwrap();
        let ratio = a(40_000) / a(10_000);
        assert!(ratio > 1.7 && ratio < 2.1, "{ratio}");
    }

    #[test]
    fn discounted_formula_rejects_gamma_zero() {
        let s = AlphaSchedule::PaperFormula { delta: 0.1 };
        let ctx = AlphaContext::Discounted { rounds: 10, dim: 2, players: 1, states: 2, gamma: 0.0 };
        assert!(s.value(ctx).is_err());
        let ok = AlphaContext::Discounted { rounds: 10, dim: 2, players: 1, states: 2, gamma: 0.9 };
        assert!(s.value(ok).unwrap() > 0.0);
    }

    #[test]
    fn ablations() {
        let ctx = AlphaContext::Matrix { rounds: 10, dim: 2 };
        assert_eq!(AlphaSchedule::Zero.value(ctx).unwrap(), 0.0);
        assert_eq!(AlphaSchedule::Constant { value: 3.0 }.value(ctx).unwrap(), 3.0);
        assert!(AlphaSchedule::PaperFormula { delta: 1.5 }.value(ctx).is_err());
        let json = serde_json::to_string(&AlphaSchedule::PaperFormula { delta: 0.05 }).unwrap();
        assert_eq!(json, r#"{"kind":"paper_formula","delta":0.05}"#);
    }
}
