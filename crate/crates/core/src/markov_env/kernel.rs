use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_index, check_len, Result, VmgError};

const KERNEL_TOL: f64 = 1e-9;

/// Base kernels `phi_h^i(s, a, .)`, stored as `[h][i][s][a][s']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFeatures {
    horizon: usize,
    states: usize,
    actions: usize,
    d: usize,
    data: Vec<f64>,
}

impl MixtureFeatures {
    /// Every slice `phi_h^i(s, a, .)` must be a distribution and every
    /// vector `phi_h(s, a, s')` must have norm at most one.
    pub fn new(horizon: usize, states: usize, actions: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if horizon == 0 || states == 0 || actions == 0 || d == 0 {
            return Err(VmgError::InvalidModel("empty mixture features".into()));
        }
        check_len(horizon * d * states * actions * states, data.len())?;
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(VmgError::NonFiniteInput { index: k });
        }
        let f = Self { horizon, states, actions, d, data };
        for h in 0..horizon {
            for s in 0..states {
                for a in 0..actions {
                    for i in 0..d {
                        let row = f.base_row(h, i, s, a);
                        let sum: f64 = row.iter().sum();
                        if row.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > KERNEL_TOL {
                            return Err(VmgError::InvalidModel(format!(
                                "base kernel {i} at (h={h}, s={s}, a={a}) is not a distribution"
                            )));
                        }
                    }
                    for sn in 0..states {
                        let sq: f64 = (0..d).map(|i| f.base_row(h, i, s, a)[sn].powi(2)).sum();
                        if sq > 1.0 + 1e-12 {
                            return Err(VmgError::InvalidModel(format!(
                                "||phi_h(s,a,s')|| > 1 at (h={h}, s={s}, a={a}, s'={sn})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(f)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn base_row(&self, h: usize, i: usize, s: usize, a: usize) -> &[f64] {
        let start = (((h * self.d + i) * self.states + s) * self.actions + a) * self.states;
        &self.data[start..start + self.states]
    }

    /// `phi_h(s, a, s')` as a vector in `R^d`.
    pub fn feature(&self, h: usize, s: usize, a: usize, s_next: usize) -> Vec<f64> {
        (0..self.d).map(|i| self.base_row(h, i, s, a)[s_next]).collect()
    }
}

/// `P_h(s' | s, a) = phi_h(s, a, s')^T theta_h` with each `theta_h` on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMixtureKernel {
    pub features: Arc<MixtureFeatures>,
    /// One weight vector per step.
    pub theta: Vec<Vec<f64>>,
}

impl LinearMixtureKernel {
    pub fn new(features: Arc<MixtureFeatures>, theta: Vec<Vec<f64>>) -> Result<Self> {
        check_len(features.horizon, theta.len())?;
        for t in &theta {
            check_len(features.d, t.len())?;
            let sum: f64 = t.iter().sum();
            if t.iter().any(|x| !x.is_finite() || *x < -1e-12) || (sum - 1.0).abs() > 1e-9 {
                return Err(VmgError::InvalidSimplex(format!("theta {t:?} is not on the simplex")));
            }
        }
        Ok(Self { features, theta })
    }

    pub fn with_theta(&self, theta: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(Arc::clone(&self.features), theta)
    }

    pub fn horizon(&self) -> usize {
        self.features.horizon
    }

    pub fn states(&self) -> usize {
        self.features.states
    }

    pub fn actions(&self) -> usize {
        self.features.actions
    }

    pub fn d(&self) -> usize {
        self.features.d
    }

    /// Dense transition table of this kernel.
    pub fn table(&self) -> TransitionTable {
        let f = &*self.features;
        let (hz, ns, na) = (f.horizon, f.states, f.actions);
        let mut p = vec![0.0; hz * ns * na * ns];
        for h in 0..hz {
            for (i, &w) in self.theta[h].iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let src = &f.data[(h * f.d + i) * ns * na * ns..(h * f.d + i + 1) * ns * na * ns];
                let dst = &mut p[h * ns * na * ns..(h + 1) * ns * na * ns];
                for (x, y) in dst.iter_mut().zip(src) {
                    *x += w * y;
                }
            }
        }
        TransitionTable { horizon: hz, states: ns, actions: na, p }
    }
}

/// `phi_h(s, a, s')^T theta_h`.
pub fn kernel_prob(kernel: &LinearMixtureKernel, h: usize, s: usize, a: usize, s_next: usize) -> Result<f64> {
    check_index(h, kernel.horizon())?;
    check_index(s, kernel.states())?;
    check_index(a, kernel.actions())?;
    check_index(s_next, kernel.states())?;
    let f = &kernel.features;
    Ok((0..f.d).map(|i| kernel.theta[h][i] * f.base_row(h, i, s, a)[s_next]).sum())
}

/// Dense `P[h][s][a][s']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTable {
    horizon: usize,
    states: usize,
    actions: usize,
    p: Vec<f64>,
}

impl TransitionTable {
    pub fn new(horizon: usize, states: usize, actions: usize, p: Vec<f64>) -> Result<Self> {
        check_len(horizon * states * actions * states, p.len())?;
        for (r, row) in p.chunks(states).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > KERNEL_TOL {
                return Err(VmgError::InvalidModel(format!("transition row {r} is not a distribution")));
            }
        }
        Ok(Self { horizon, states, actions, p })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    #[inline]
    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let start = ((h * self.states + s) * self.actions + a) * self.states;
        &self.p[start..start + self.states]
    }
}

/// Rewards `r_h^n(s, a)` in `[0, 1]`, stored as `[h][s][a][n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rewards {
    horizon: usize,
    states: usize,
    actions: usize,
    players: usize,
    data: Vec<f64>,
}

impl Rewards {
    pub fn new(horizon: usize, states: usize, actions: usize, players: usize, data: Vec<f64>) -> Result<Self> {
        check_len(horizon * states * actions * players, data.len())?;
        if let Some(k) = data.iter().position(|r| !(0.0..=1.0).contains(r)) {
            return Err(VmgError::InvalidModel(format!("reward entry {k} = {} outside [0, 1]", data[k])));
        }
        Ok(Self { horizon, states, actions, players, data })
    }

    pub fn zeros(horizon: usize, states: usize, actions: usize, players: usize) -> Self {
        Self { horizon, states, actions, players, data: vec![0.0; horizon * states * actions * players] }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize, n: usize) -> f64 {
        self.data[((h * self.states + s) * self.actions + a) * self.players + n]
    }

    /// `r_h^n(s, a) + r_h^m(s, a) = 1` for every entry; the zero-sum convention.
    pub fn is_constant_sum(&self) -> bool {
        self.players == 2 && self.data.chunks(2).all(|r| (r[0] + r[1] - 1.0).abs() <= 1e-12)
    }
}
