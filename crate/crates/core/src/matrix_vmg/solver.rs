//! Regularized Nash equilibria of zero-sum matrix games and best responses.

use crate::error::{check_len, Result, VmgError};
use crate::game_core::{reg_game_value, RegGameSpec, Simplex};
use crate::linalg::{argmax, argmin, least_squares, log_sum_exp, softmax, Matrix};

/// Closed-form best response of the max player: `mu_i ∝ mu_ref_i exp((A nu)_i / beta)`,
/// or a lowest-index point mass on `argmax (A nu)` when `beta = 0`.
pub fn best_response_max(a: &Matrix, nu: &Simplex, spec: &RegGameSpec) -> Result<Simplex> {
    check_len(a.cols(), nu.len())?;
    check_len(a.rows(), spec.m())?;
    let payoff = a.mul_vec(nu.as_slice());
    Ok(soft_or_hard_max(&payoff, spec.mu_ref.as_slice(), spec.beta))
}

/// Closed-form best response of the min player: `nu_j ∝ nu_ref_j exp(-(mu^T A)_j / beta)`.
pub fn best_response_min(a: &Matrix, mu: &Simplex, spec: &RegGameSpec) -> Result<Simplex> {
    check_len(a.rows(), mu.len())?;
    check_len(a.cols(), spec.n())?;
    let cost = a.vec_mul(mu.as_slice());
    if spec.beta == 0.0 {
        return Ok(Simplex::point_mass(cost.len(), argmin(&cost)));
    }
    let neg: Vec<f64> = cost.iter().map(|c| -c).collect();
    Ok(soft_or_hard_max(&neg, spec.nu_ref.as_slice(), spec.beta))
}

pub(crate) fn soft_or_hard_max(payoff: &[f64], reference: &[f64], beta: f64) -> Simplex {
    if beta == 0.0 {
        return Simplex::point_mass(payoff.len(), argmax(payoff));
    }
    let logits: Vec<f64> = payoff.iter().zip(reference).map(|(p, r)| r.ln() + p / beta).collect();
    Simplex::new(softmax(&logits)).expect("softmax output is a distribution")
}

/// `f^{*,nu}(A) = max_mu f^{mu,nu}(A)`.
pub fn max_value(a: &Matrix, nu: &Simplex, spec: &RegGameSpec) -> Result<f64> {
    let br = best_response_max(a, nu, spec)?;
    reg_game_value(a, &br, nu, spec)
}

/// `f^{mu,*}(A) = min_nu f^{mu,nu}(A)`.
pub fn min_value(a: &Matrix, mu: &Simplex, spec: &RegGameSpec) -> Result<f64> {
    let br = best_response_min(a, mu, spec)?;
    reg_game_value(a, mu, &br, spec)
}

/// `f^{*,nu}(A) - f^{mu,*}(A)`; nonnegative up to rounding.
pub fn duality_gap(a: &Matrix, mu: &Simplex, nu: &Simplex, spec: &RegGameSpec) -> Result<f64> {
    Ok(max_value(a, nu, spec)? - min_value(a, mu, spec)?)
}

/// Knobs of the equilibrium solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeSolverSettings {
    /// Iteration cap for a single regularized solve.
    pub max_iters: usize,
    /// Smallest temperature on the annealing path used when `beta = 0`.
    pub beta_min: f64,
    /// Geometric factor between consecutive annealing temperatures.
    pub anneal_factor: f64,
    /// Iteration cap per annealing stage.
    pub stage_iters: usize,
}

impl Default for NeSolverSettings {
    fn default() -> Self {
        Self { max_iters: 200_000, beta_min: 1e-6, anneal_factor: 0.5, stage_iters: 50_000 }
    }
}

/// An equilibrium together with its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct NeSolution {
    pub mu: Simplex,
    pub nu: Simplex,
    /// Duality gap under the requested `beta`.
    pub gap: f64,
    pub iterations: usize,
}

/// Equilibrium `(mu, nu)` with duality gap at most `tol`.
pub fn solve_matrix_ne(a: &Matrix, spec: &RegGameSpec, tol: f64) -> Result<(Simplex, Simplex)> {
    let sol = solve_matrix_ne_with(a, spec, tol, None, &NeSolverSettings::default())?;
    Ok((sol.mu, sol.nu))
}

/// [`solve_matrix_ne`] with an optional warm start and explicit settings.
pub fn solve_matrix_ne_with(
    a: &Matrix,
    spec: &RegGameSpec,
    tol: f64,
    warm: Option<(&Simplex, &Simplex)>,
    settings: &NeSolverSettings,
) -> Result<NeSolution> {
    if !(tol > 0.0) {
        return Err(VmgError::InvalidModel(format!("solver tolerance must be positive, got {tol}")));
    }
    check_len(spec.m(), a.rows())?;
    check_len(spec.n(), a.cols())?;
    if let Some((mu, nu)) = warm {
        check_len(a.rows(), mu.len())?;
        check_len(a.cols(), nu.len())?;
    }
    if spec.beta > 0.0 {
        let start = warm_start_logs(spec, warm);
        let (mu, nu, gap, iterations) = extragradient(a, spec, tol, start, settings.max_iters)?;
        if gap > tol {
            return Err(VmgError::NonConvergence { iterations, residual: gap });
        }
        Ok(NeSolution { mu, nu, gap, iterations })
    } else {
        anneal(a, spec, tol, warm, settings)
    }
}

type LogPair = (Vec<f64>, Vec<f64>);

fn warm_start_logs(spec: &RegGameSpec, warm: Option<(&Simplex, &Simplex)>) -> LogPair {
    // Mix with the reference so every log stays finite.
    let mix = |p: &[f64], r: &[f64]| -> Vec<f64> {
        p.iter().zip(r).map(|(x, y)| (0.999 * x + 0.001 * y).ln()).collect()
    };
    match warm {
        Some((mu, nu)) => (
            mix(mu.as_slice(), spec.mu_ref.as_slice()),
            mix(nu.as_slice(), spec.nu_ref.as_slice()),
        ),
        None => (
            spec.mu_ref.as_slice().iter().map(|x| x.ln()).collect(),
            spec.nu_ref.as_slice().iter().map(|x| x.ln()).collect(),
        ),
    }
}

fn normalize_logs(l: &mut [f64]) {
    let z = log_sum_exp(l);
    for x in l.iter_mut() {
        *x -= z;
    }
}

fn exp_simplex(l: &[f64]) -> Simplex {
    Simplex::new(softmax(l)).expect("softmax output is a distribution")
}

/// Predictive-update extragradient in the KL geometry; converges linearly for `beta > 0`.
fn extragradient(
    a: &Matrix,
    spec: &RegGameSpec,
    tol: f64,
    start: LogPair,
    max_iters: usize,
) -> Result<(Simplex, Simplex, f64, usize)> {
    let beta = spec.beta;
    let eta = 1.0 / (beta + 2.0 * a.max_abs());
    let keep = 1.0 - eta * beta;
    let ref_mu: Vec<f64> = spec.mu_ref.as_slice().iter().map(|x| x.ln()).collect();
    let ref_nu: Vec<f64> = spec.nu_ref.as_slice().iter().map(|x| x.ln()).collect();
    let (mut lmu, mut lnu) = start;
    normalize_logs(&mut lmu);
    normalize_logs(&mut lnu);

    let step = |l: &[f64], r: &[f64], g: &[f64], sign: f64| -> Vec<f64> {
        let mut out: Vec<f64> =
            l.iter().zip(r).zip(g).map(|((x, y), z)| keep * x + eta * beta * y + sign * eta * z).collect();
        normalize_logs(&mut out);
        out
    };

    let mut iterations = 0;
    let mut mu = exp_simplex(&lmu);
    let mut nu = exp_simplex(&lnu);
    let mut gap = duality_gap(a, &mu, &nu, spec)?;
    while gap > tol && iterations < max_iters {
        for _ in 0..10 {
            let mu_p = softmax(&lmu);
            let nu_p = softmax(&lnu);
            let lmu_bar = step(&lmu, &ref_mu, &a.mul_vec(&nu_p), 1.0);
            let lnu_bar = step(&lnu, &ref_nu, &a.vec_mul(&mu_p), -1.0);
            let mu_bar = softmax(&lmu_bar);
            let nu_bar = softmax(&lnu_bar);
            lmu = step(&lmu, &ref_mu, &a.mul_vec(&nu_bar), 1.0);
            lnu = step(&lnu, &ref_nu, &a.vec_mul(&mu_bar), -1.0);
            iterations += 1;
        }
        mu = exp_simplex(&lmu);
        nu = exp_simplex(&lnu);
        gap = duality_gap(a, &mu, &nu, spec)?;
        if !gap.is_finite() {
            return Err(VmgError::NonConvergence { iterations, residual: gap });
        }
    }
    Ok((mu, nu, gap, iterations))
}

/// Unregularized equilibrium by following the regularized solution as the
/// temperature decreases, certifying each candidate by its duality gap.
fn anneal(
    a: &Matrix,
    spec: &RegGameSpec,
    tol: f64,
    warm: Option<(&Simplex, &Simplex)>,
    settings: &NeSolverSettings,
) -> Result<NeSolution> {
    let (m, n) = (a.rows(), a.cols());
    let scale = a.max_abs();
    let mut best = {
        let (mu, nu) = match warm {
            Some((mu, nu)) => (mu.clone(), nu.clone()),
            None => (spec.mu_ref.clone(), spec.nu_ref.clone()),
        };
        let gap = duality_gap(a, &mu, &nu, spec)?;
        NeSolution { mu, nu, gap, iterations: 0 }
    };
    if best.gap <= tol {
        return Ok(best);
    }
    if let Some(p) = polish(a, spec, &best.mu, &best.nu)? {
        if p.gap < best.gap {
            best = p;
        }
        if best.gap <= tol {
            return Ok(best);
        }
    }

    // The annealing path uses interior references even if the caller's are not.
    let interior = |r: &Simplex| -> Simplex {
        Simplex::from_weights(r.as_slice().iter().map(|x| x + 1e-6).collect()).expect("positive weights")
    };
    let mu_ref = interior(&spec.mu_ref);
    let nu_ref = interior(&spec.nu_ref);
    let mut temp = scale.max(settings.beta_min);
    let mut logs = {
        let stage = RegGameSpec::new(temp, mu_ref.clone(), nu_ref.clone())?;
        warm_start_logs(&stage, warm)
    };
    let mut total_iters = 0;
    loop {
        let stage = RegGameSpec::new(temp, mu_ref.clone(), nu_ref.clone())?;
        let stage_tol = (temp * 1e-6).max(tol * 1e-2);
        let (mu, nu, _, iters) = extragradient(a, &stage, stage_tol, logs, settings.stage_iters)?;
        total_iters += iters;
        logs = (
            mu.as_slice().iter().map(|x| x.max(1e-300).ln()).collect(),
            nu.as_slice().iter().map(|x| x.max(1e-300).ln()).collect(),
        );
        let gap = duality_gap(a, &mu, &nu, spec)?;
        if gap < best.gap {
            best = NeSolution { mu: mu.clone(), nu: nu.clone(), gap, iterations: total_iters };
        }
        if best.gap > tol {
            if let Some(p) = polish(a, spec, &mu, &nu)? {
                if p.gap < best.gap {
                    best = NeSolution { iterations: total_iters, ..p };
                }
            }
        }
        if best.gap <= tol {
            best.iterations = total_iters;
            return Ok(best);
        }
        if temp <= settings.beta_min || total_iters >= settings.max_iters {
            break;
        }
        temp = (temp * settings.anneal_factor).max(settings.beta_min);
    }
    let _ = (m, n);
    Err(VmgError::NonConvergence { iterations: total_iters, residual: best.gap })
}

/// Solves the indifference conditions on the top-`k` supports of an
/// approximate equilibrium and keeps the candidate with the smallest gap.
fn polish(a: &Matrix, spec: &RegGameSpec, mu: &Simplex, nu: &Simplex) -> Result<Option<NeSolution>> {
    let order = |p: &[f64]| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..p.len()).collect();
        idx.sort_by(|&x, &y| p[y].partial_cmp(&p[x]).expect("finite").then(x.cmp(&y)));
        idx
    };
    let rows = order(mu.as_slice());
    let cols = order(nu.as_slice());
    let kmax = a.rows().min(a.cols());
    let mut best: Option<NeSolution> = None;
    for k in 1..=kmax {
        let sr = &rows[..k];
        let sc = &cols[..k];
        // nu on the column support: (A nu)_i = v on the row support, sum nu = 1
        let nu_sol = indifference(k, |r, c| a.get(sr[r], sc[c]))?;
        let mu_sol = indifference(k, |r, c| a.get(sr[c], sc[r]))?;
        let (Some(nu_s), Some(mu_s)) = (nu_sol, mu_sol) else { continue };
        let mut full_mu = vec![0.0; a.rows()];
        let mut full_nu = vec![0.0; a.cols()];
        for (slot, &i) in sr.iter().enumerate() {
            full_mu[i] = mu_s[slot];
        }
        for (slot, &j) in sc.iter().enumerate() {
            full_nu[j] = nu_s[slot];
        }
        let (Ok(cmu), Ok(cnu)) = (Simplex::from_weights(full_mu), Simplex::from_weights(full_nu)) else {
            continue;
        };
        let gap = duality_gap(a, &cmu, &cnu, spec)?;
        if best.as_ref().is_none_or(|b| gap < b.gap) {
            best = Some(NeSolution { mu: cmu, nu: cnu, gap, iterations: 0 });
        }
    }
    Ok(best)
}

/// Least-squares solution of `sum_c M(r, c) x_c - v = 0` for all rows `r`,
/// `sum x = 1`, clipped to nonnegative weights.
fn indifference(k: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Option<Vec<f64>>> {
    let mut sys = Matrix::zeros(k + 1, k + 1);
    let mut rhs = vec![0.0; k + 1];
    for r in 0..k {
        for c in 0..k {
            sys.set(r, c, entry(r, c));
        }
        sys.set(r, k, -1.0);
    }
    for c in 0..k {
        sys.set(k, c, 1.0);
    }
    rhs[k] = 1.0;
    let sol = least_squares(&sys, &rhs)?;
    if sol.iter().any(|x| !x.is_finite()) {
        return Ok(None);
    }
    let w: Vec<f64> = sol[..k].iter().map(|x| x.max(0.0)).collect();
    if w.iter().sum::<f64>() <= 0.0 {
        return Ok(None);
    }
    Ok(Some(w))
}
