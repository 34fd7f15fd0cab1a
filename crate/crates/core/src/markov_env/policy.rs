use serde::{Deserialize, Serialize};

use crate::error::{check_index, check_len, Result, VmgError};
use crate::game_core::Simplex;

const ROW_TOL: f64 = 1e-9;

/// Mixed-radix enumeration of joint actions; player 0 is the most significant digit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointActionSpace {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl JointActionSpace {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(VmgError::InvalidModel(format!("invalid action counts {sizes:?}")));
        }
        let mut strides = vec![1; sizes.len()];
        for n in (0..sizes.len() - 1).rev() {
            strides[n] = strides[n + 1] * sizes[n + 1];
        }
        let total = strides[0] * sizes[0];
        Ok(Self { sizes, strides, total })
    }

    pub fn players(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self) -> usize {
        self.total
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn player_actions(&self, n: usize) -> usize {
        self.sizes[n]
    }

    pub fn encode(&self, actions: &[usize]) -> Result<usize> {
        check_len(self.sizes.len(), actions.len())?;
        let mut idx = 0;
        for (n, &a) in actions.iter().enumerate() {
            check_index(a, self.sizes[n])?;
            idx += a * self.strides[n];
        }
        Ok(idx)
    }

    pub fn decode(&self, idx: usize) -> Vec<usize> {
        (0..self.sizes.len()).map(|n| self.component(idx, n)).collect()
    }

    #[inline]
    pub fn component(&self, idx: usize, n: usize) -> usize {
        (idx / self.strides[n]) % self.sizes[n]
    }

    /// `idx` with player `n`'s action replaced by `a_n`.
    #[inline]
    pub fn replace(&self, idx: usize, n: usize, a_n: usize) -> usize {
        idx - self.component(idx, n) * self.strides[n] + a_n * self.strides[n]
    }
}

/// A Markov policy of one player, `pi_h(a | s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerPolicy {
    horizon: usize,
    states: usize,
    actions: usize,
    probs: Vec<f64>,
}

fn check_rows(probs: &[f64], width: usize) -> Result<()> {
    for (r, row) in probs.chunks(width).enumerate() {
        if row.iter().any(|p| !p.is_finite() || *p < -ROW_TOL) {
            return Err(VmgError::InvalidSimplex(format!("row {r} has a negative or non-finite entry")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOL {
            return Err(VmgError::InvalidSimplex(format!("row {r} sums to {sum}")));
        }
    }
    Ok(())
}

impl PlayerPolicy {
    /// `probs` is laid out as `[h][s][a]`; every row must be a distribution.
    pub fn new(horizon: usize, states: usize, actions: usize, probs: Vec<f64>) -> Result<Self> {
        check_len(horizon * states * actions, probs.len())?;
        check_rows(&probs, actions)?;
        Ok(Self { horizon, states, actions, probs })
    }

    pub fn uniform(horizon: usize, states: usize, actions: usize) -> Self {
        Self { horizon, states, actions, probs: vec![1.0 / actions as f64; horizon * states * actions] }
    }

    pub fn from_rows(horizon: usize, states: usize, rows: Vec<Simplex>) -> Result<Self> {
        check_len(horizon * states, rows.len())?;
        let actions = rows.first().map_or(0, Simplex::len);
        let mut probs = Vec::with_capacity(horizon * states * actions);
        for r in rows {
            check_len(actions, r.len())?;
            probs.extend(r.into_vec());
        }
        Ok(Self { horizon, states, actions, probs })
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
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let start = (h * self.states + s) * self.actions;
        &self.probs[start..start + self.actions]
    }


    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// A Markov policy over joint actions, possibly correlated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPolicy {
    horizon: usize,
    states: usize,
    space: JointActionSpace,
    probs: Vec<f64>,
    /// Set when the policy factorizes across players.
    pub product: bool,
}

impl JointPolicy {
    pub fn new(horizon: usize, states: usize, space: JointActionSpace, probs: Vec<f64>) -> Result<Self> {
        check_len(horizon * states * space.size(), probs.len())?;
        check_rows(&probs, space.size())?;
        Ok(Self { horizon, states, space, probs, product: false })
    }

    pub fn from_product(space: &JointActionSpace, players: &[PlayerPolicy]) -> Result<Self> {
        check_len(space.players(), players.len())?;
        let (horizon, states) = (players[0].horizon, players[0].states);
        for (n, p) in players.iter().enumerate() {
            check_len(space.player_actions(n), p.actions)?;
            check_len(horizon, p.horizon)?;
            check_len(states, p.states)?;
        }
        let size = space.size();
        let mut probs = vec![0.0; horizon * states * size];
        for h in 0..horizon {
            for s in 0..states {
                let row = &mut probs[(h * states + s) * size..(h * states + s + 1) * size];
                for (a, slot) in row.iter_mut().enumerate() {
                    *slot = players.iter().enumerate().map(|(n, p)| p.row(h, s)[space.component(a, n)]).product();
                }
            }
        }
        Ok(Self { horizon, states, space: space.clone(), probs, product: true })
    }

    pub fn uniform(horizon: usize, states: usize, space: &JointActionSpace) -> Self {
        let size = space.size();
        Self {
            horizon,
            states,
            space: space.clone(),
            probs: vec![1.0 / size as f64; horizon * states * size],
            product: true,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn space(&self) -> &JointActionSpace {
        &self.space
    }

    #[inline]
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let size = self.space.size();
        let start = (h * self.states + s) * size;
        &self.probs[start..start + size]
    }


    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Marginal distribution of player `n` at `(h, s)`.
    pub fn marginal_row(&self, h: usize, s: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.space.player_actions(n)];
        for (a, p) in self.row(h, s).iter().enumerate() {
            out[self.space.component(a, n)] += p;
        }
        out
    }

    pub fn marginal(&self, n: usize) -> PlayerPolicy {
        let actions = self.space.player_actions(n);
        let mut probs = Vec::with_capacity(self.horizon * self.states * actions);
        for h in 0..self.horizon {
            for s in 0..self.states {
                probs.extend(self.marginal_row(h, s, n));
            }
        }
        PlayerPolicy { horizon: self.horizon, states: self.states, actions, probs }
    }

    /// `dev^n x pi^{-n}`: player `n` plays `dev` independently of the
    /// others, who keep their (possibly correlated) joint marginal.
    pub fn deviate(&self, n: usize, dev: &PlayerPolicy) -> Result<JointPolicy> {
        check_index(n, self.space.players())?;
        check_len(self.space.player_actions(n), dev.actions)?;
        check_len(self.horizon, dev.horizon)?;
        check_len(self.states, dev.states)?;
        let size = self.space.size();
        let mut probs = vec![0.0; self.probs.len()];
        for h in 0..self.horizon {
            for s in 0..self.states {
                let base = (h * self.states + s) * size;
                let d = dev.row(h, s);
                for (b, &p) in self.row(h, s).iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    for (a_n, &q) in d.iter().enumerate() {
                        probs[base + self.space.replace(b, n, a_n)] += p * q;
                    }
                }
            }
        }
        Ok(JointPolicy { horizon: self.horizon, states: self.states, space: self.space.clone(), probs, product: self.product })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_radix_round_trip() {
        let space = JointActionSpace::new(vec![2, 3, 4]).unwrap();
        assert_eq!(space.size(), 24);
        for idx in 0..24 {
            let a = space.decode(idx);
            assert_eq!(space.encode(&a).unwrap(), idx);
            for v in 0..3 {
                let r = space.replace(idx, 1, v);
                assert_eq!(space.component(r, 1), v);
                assert_eq!(space.component(r, 0), a[0]);
                assert_eq!(space.component(r, 2), a[2]);
            }
        }
        assert!(space.encode(&[2, 0, 0]).is_err());
    }

    #[test]
    fn product_marginals_and_deviation() {
        let space = JointActionSpace::new(vec![2, 2]).unwrap();
        let p0 = PlayerPolicy::new(1, 1, 2, vec![0.3, 0.7]).unwrap();
        let p1 = PlayerPolicy::new(1, 1, 2, vec![0.6, 0.4]).unwrap();
        let joint = JointPolicy::from_product(&space, &[p0.clone(), p1.clone()]).unwrap();
        assert!((joint.row(0, 0)[1] - 0.3 * 0.4).abs() < 1e-15);
        let m = joint.marginal(1);
        assert!((m.row(0, 0)[0] - 0.6).abs() < 1e-15);
        let dev = PlayerPolicy::new(1, 1, 2, vec![1.0, 0.0]).unwrap();
        let d = joint.deviate(0, &dev).unwrap();
        assert!(crate::linalg::max_abs_diff(d.row(0, 0), &[0.6, 0.4, 0.0, 0.0]) < 1e-15);
    }

    #[test]
    fn correlated_deviation_keeps_opponent_marginal() {
        let space = JointActionSpace::new(vec![2, 2]).unwrap();
        let joint = JointPolicy::new(1, 1, space, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let dev = PlayerPolicy::new(1, 1, 2, vec![0.0, 1.0]).unwrap();
        let d = joint.deviate(0, &dev).unwrap();
        assert_eq!(d.row(0, 0), &[0.0, 0.0, 0.5, 0.5]);
    }
}
