use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::simplex::{kl_divergence, Simplex};
use crate::error::{check_index, check_len, Result, VmgError};
use crate::linalg::{dot, norm2, Matrix};

const NORM_SLACK: f64 = 1e-12;

/// Known feature vectors `phi(i, j)` of a linear payoff class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    m: usize,
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl FeatureTable {
    /// `data` is laid out as `[i][j][k]`. Every `phi(i, j)` must have norm at most one.
    pub fn new(m: usize, n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 || d == 0 {
            return Err(VmgError::InvalidModel("empty feature table".into()));
        }
        check_len(m * n * d, data.len())?;
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(VmgError::NonFiniteInput { index: k });
        }
        let table = Self { m, n, d, data };
        for i in 0..m {
            for j in 0..n {
                let norm = norm2(table.feature(i, j));
                if norm > 1.0 + NORM_SLACK {
                    return Err(VmgError::InvalidModel(format!("||phi({i},{j})|| = {norm} > 1")));
                }
            }
        }
        Ok(table)
    }

    /// One-hot features `phi(i, j) = e_{i n + j}`; realizes every `m x n` matrix.
    pub fn one_hot(m: usize, n: usize) -> Self {
        let d = m * n;
        let mut data = vec![0.0; m * n * d];
        for k in 0..d {
            data[k * d + k] = 1.0;
        }
        Self { m, n, d, data }
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn feature(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.n + j) * self.d;
        &self.data[start..start + self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `A_omega(i, j) = phi(i, j)^T omega`
    pub fn entry(&self, omega: &[f64], i: usize, j: usize) -> Result<f64> {
        check_len(self.d, omega.len())?;
        check_index(i, self.m)?;
        check_index(j, self.n)?;
        Ok(dot(self.feature(i, j), omega))
    }

    /// The full payoff matrix `A_omega`.
    pub fn payoff_matrix(&self, omega: &[f64]) -> Matrix {
        debug_assert_eq!(omega.len(), self.d);
        Matrix::from_fn(self.m, self.n, |i, j| dot(self.feature(i, j), omega))
    }

    /// `E_{i~mu, j~nu} phi(i, j)`
    pub fn expected_feature(&self, mu: &[f64], nu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for (i, &p) in mu.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, &q) in nu.iter().enumerate() {
                let w = p * q;
                if w == 0.0 {
                    continue;
                }
                for (o, &f) in out.iter_mut().zip(self.feature(i, j)) {
                    *o += w * f;
                }
            }
        }
        out
    }

    /// Largest `|phi(i,j) + phi(j,i)|` entry; zero for antisymmetric tables.
    pub fn antisymmetry_defect(&self) -> f64 {
        if self.m != self.n {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.m {
            for j in 0..self.n {
                for (a, b) in self.feature(i, j).iter().zip(self.feature(j, i)) {
                    worst = worst.max((a + b).abs());
                }
            }
        }
        worst
    }
}

/// Projects `omega` onto the Euclidean ball of the given radius.
pub fn project_ball(omega: &mut [f64], radius: f64) {
    let norm = norm2(omega);
    if norm > radius {
        let scale = radius / norm;
        for x in omega.iter_mut() {
            *x *= scale;
        }
    }
}

/// A linear payoff class together with one parameter: `A_omega(i,j) = phi(i,j)^T omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPayoffModel {
    pub features: FeatureTable,
    pub omega: Vec<f64>,
    /// Entry-wise payoff bound `B_l`.
    pub bound: f64,
}

impl LinearPayoffModel {
    pub fn new(features: FeatureTable, omega: Vec<f64>, bound: f64) -> Result<Self> {
        check_len(features.d(), omega.len())?;
        if !(bound > 0.0) {
            return Err(VmgError::InvalidModel(format!("payoff bound must be positive, got {bound}")));
        }
        let radius = (features.d() as f64).sqrt();
        let norm = norm2(&omega);
        if norm > radius + NORM_SLACK {
            return Err(VmgError::InvalidModel(format!("||omega|| = {norm} exceeds sqrt(d) = {radius}")));
        }
        let a = features.payoff_matrix(&omega);
        if a.max_abs() > bound + NORM_SLACK {
            return Err(VmgError::InvalidModel(format!(
                "max |A_omega| = {} exceeds bound {bound}",
                a.max_abs()
            )));
        }
        Ok(Self { features, omega, bound })
    }

    pub fn m(&self) -> usize {
        self.features.m()
    }

    pub fn n(&self) -> usize {
        self.features.n()
    }

    pub fn d(&self) -> usize {
        self.features.d()
    }

    pub fn payoff_matrix(&self) -> Matrix {
        self.features.payoff_matrix(&self.omega)
    }
}

/// `phi(i, j)^T omega` for the model's own parameter.
pub fn payoff_entry(model: &LinearPayoffModel, i: usize, j: usize) -> Result<f64> {
    model.features.entry(&model.omega, i, j)
}

/// Regularization settings of the game objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegGameSpec {
    pub beta: f64,
    pub mu_ref: Simplex,
    pub nu_ref: Simplex,
}

/// Minimum reference-policy entry required when `beta > 0`.
pub const MIN_REF_ENTRY: f64 = 1e-9;

impl RegGameSpec {
    pub fn new(beta: f64, mu_ref: Simplex, nu_ref: Simplex) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(VmgError::InvalidModel(format!("beta must be finite and >= 0, got {beta}")));
        }
        if beta > 0.0 && (mu_ref.min_entry() < MIN_REF_ENTRY || nu_ref.min_entry() < MIN_REF_ENTRY) {
            return Err(VmgError::InvalidModel(
                "reference policies need entries >= 1e-9 when beta > 0".into(),
            ));
        }
        Ok(Self { beta, mu_ref, nu_ref })
    }

    /// Uniform references on `m` and `n` actions.
    pub fn uniform(beta: f64, m: usize, n: usize) -> Result<Self> {
        Self::new(beta, Simplex::uniform(m), Simplex::uniform(n))
    }

    pub fn m(&self) -> usize {
        self.mu_ref.len()
    }

    pub fn n(&self) -> usize {
        self.nu_ref.len()
    }
}

/// `f^{mu,nu}(A) = mu^T A nu - beta KL(mu || mu_ref) + beta KL(nu || nu_ref)`.
pub fn reg_game_value(a: &Matrix, mu: &Simplex, nu: &Simplex, spec: &RegGameSpec) -> Result<f64> {
    check_len(a.rows(), mu.len())?;
    check_len(a.cols(), nu.len())?;
    check_len(spec.m(), mu.len())?;
    check_len(spec.n(), nu.len())?;
    let bilinear = a.bilinear(mu.as_slice(), nu.as_slice());
    if spec.beta == 0.0 {
        return Ok(bilinear);
    }
    let kl_mu = kl_divergence(mu, &spec.mu_ref)?;
    let kl_nu = kl_divergence(nu, &spec.nu_ref)?;
    Ok(bilinear - spec.beta * kl_mu + spec.beta * kl_nu)
}

/// Noise family of the feedback oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// Uniform on `[-sigma sqrt(3), sigma sqrt(3)]` (variance `sigma^2`).
    Uniform,
}

/// Returns `A(i, j) + xi` for the true payoff model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseOracle {
    pub true_model: LinearPayoffModel,
    pub sigma: f64,
    pub distribution: NoiseKind,
}

impl NoiseOracle {
    pub fn new(true_model: LinearPayoffModel, sigma: f64, distribution: NoiseKind) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(VmgError::InvalidModel(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { true_model, sigma, distribution })
    }

    pub fn true_payoff(&self) -> Matrix {
        self.true_model.payoff_matrix()
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        match self.distribution {
            NoiseKind::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.sigma * z
            }
            NoiseKind::Uniform => {
                let half_width = self.sigma * 3f64.sqrt();
                rng.random_range(-half_width..=half_width)
            }
        }
    }
}

/// One noisy observation of entry `(i, j)`.
pub fn noisy_query<R: Rng + ?Sized>(oracle: &NoiseOracle, i: usize, j: usize, rng: &mut R) -> Result<f64> {
    let mean = payoff_entry(&oracle.true_model, i, j)?;
    Ok(mean + oracle.draw_noise(rng))
}

/// Append-only record of `(i, j, observed value)` tuples with running
/// least-squares statistics for a fixed feature table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDataset {
    m: usize,
    n: usize,
    tuples: Vec<(usize, usize, f64)>,
    /// `sum phi phi^T`, row-major `d x d`.
    gram: Vec<f64>,
    /// `sum v phi`
    moment: Vec<f64>,
    /// `sum v^2`
    sum_sq: f64,
}

impl MatrixDataset {
    pub fn new(features: &FeatureTable) -> Self {
        let d = features.d();
        Self {
            m: features.m(),
            n: features.n(),
            tuples: Vec::new(),
            gram: vec![0.0; d * d],
            moment: vec![0.0; d],
            sum_sq: 0.0,
        }
    }

    pub fn push(&mut self, features: &FeatureTable, i: usize, j: usize, value: f64) -> Result<()> {
        check_index(i, self.m)?;
        check_index(j, self.n)?;
        if !value.is_finite() {
            return Err(VmgError::NonFiniteInput { index: self.tuples.len() });
        }
        let phi = features.feature(i, j);
        let d = phi.len();
        for a in 0..d {
            if phi[a] == 0.0 {
                continue;
            }
            for b in 0..d {
                self.gram[a * d + b] += phi[a] * phi[b];
            }
            self.moment[a] += value * phi[a];
        }
        self.sum_sq += value * value;
        self.tuples.push((i, j, value));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[(usize, usize, f64)] {
        &self.tuples
    }

    /// `sum (A_omega(i,j) - v)^2` from the running statistics.
    pub fn squared_loss(&self, omega: &[f64]) -> f64 {
        let d = omega.len();
        let mut quad = 0.0;
        for a in 0..d {
            quad += omega[a] * dot(&self.gram[a * d..(a + 1) * d], omega);
        }
        (quad - 2.0 * dot(&self.moment, omega) + self.sum_sq).max(0.0)
    }

    /// Gradient `2 (G omega - b)` of [`MatrixDataset::squared_loss`].
    pub fn squared_loss_grad(&self, omega: &[f64]) -> Vec<f64> {
        let d = omega.len();
        (0..d)
            .map(|a| 2.0 * (dot(&self.gram[a * d..(a + 1) * d], omega) - self.moment[a]))
            .collect()
    }

    /// Mean squared residual by direct summation over the stored tuples.
    pub fn mean_residual(&self, features: &FeatureTable, omega: &[f64]) -> f64 {
        if self.tuples.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .tuples
            .iter()
            .map(|&(i, j, v)| {
                let r = dot(features.feature(i, j), omega) - v;
                r * r
            })
            .sum();
        total / self.tuples.len() as f64
    }
}
