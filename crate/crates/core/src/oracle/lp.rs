//! Dense two-phase simplex with Bland's rule, plus the equilibrium LPs built on it.

use crate::error::{Result, VmgError};

const EPS: f64 = 1e-11;
const PIVOT_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// One row `coefs . x  (rel)  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coefs: Vec<f64>,
    pub rel: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Largest violation of any row or of `x >= 0`.
    pub residual: f64,
}

struct Tableau {
    /// `rows x (cols + 1)`; last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Reduced costs `c_B B^-1 A - c` (last entry: objective value) for cost vector `c`.
    fn reduced(&self, c: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = (0..=self.cols).map(|j| if j < self.cols { -c[j] } else { 0.0 }).collect();
        for (row, &b) in self.t.iter().zip(&self.basis) {
            let cb = c[b];
            if cb != 0.0 {
                for (zj, v) in z.iter_mut().zip(row) {
                    *zj += cb * v;
                }
            }
        }
        z
    }

    /// Maximizes `c . x` over columns allowed by `allowed`.
    fn optimize(&mut self, c: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<()> {
        for _ in 0..PIVOT_CAP {
            let z = self.reduced(c);
            let Some(enter) = (0..self.cols).find(|&j| allowed(j) && z[j] < -EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[enter];
                if a > EPS {
                    let ratio = row[self.cols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - EPS || (ratio <= best + EPS && self.basis[i] < self.basis[k]) {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(VmgError::LpFailure("unbounded".into()));
            };
            self.pivot(r, enter);
        }
        Err(VmgError::LpFailure(format!("no optimum after {PIVOT_CAP} pivots")))
    }
}

/// Maximizes `c . x` subject to `rows` and `x >= 0`.
pub fn maximize(c: &[f64], rows: &[LpRow]) -> Result<LpSolution> {
    let n = c.len();
    for row in rows {
        if row.coefs.len() != n {
            return Err(VmgError::DimensionMismatch { expected: n, actual: row.coefs.len() });
        }
    }
    let mut norm: Vec<LpRow> = rows.to_vec();
    for row in norm.iter_mut() {
        if row.rhs < 0.0 {
            row.coefs.iter_mut().for_each(|v| *v = -*v);
            row.rhs = -row.rhs;
            row.rel = match row.rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }
    let slacks = norm.iter().filter(|r| r.rel != Relation::Eq).count();
    let artificials = norm.iter().filter(|r| r.rel != Relation::Le).count();
    let cols = n + slacks + artificials;
    let mut t = Vec::with_capacity(norm.len());
    let mut basis = Vec::with_capacity(norm.len());
    let (mut next_slack, mut next_art) = (n, n + slacks);
    for row in &norm {
        let mut line = vec![0.0; cols + 1];
        line[..n].copy_from_slice(&row.coefs);
        line[cols] = row.rhs;
        match row.rel {
            Relation::Le => {
                line[next_slack] = 1.0;
                basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                line[next_slack] = -1.0;
                next_slack += 1;
                line[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                line[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
        }
        t.push(line);
    }
    let mut tab = Tableau { t, basis, cols };
    let is_art = |j: usize| j >= n + slacks;

    if artificials > 0 {
        let phase1: Vec<f64> = (0..cols).map(|j| if is_art(j) { -1.0 } else { 0.0 }).collect();
        tab.optimize(&phase1, &|_| true)?;
        let infeasibility = -tab.reduced(&phase1)[cols];
        let scale = 1.0 + norm.iter().map(|r| r.rhs).fold(0.0, f64::max);
        if infeasibility > 1e-9 * scale {
            return Err(VmgError::LpInfeasible(format!("phase one left {infeasibility:e}")));
        }
        for r in 0..tab.t.len() {
            if is_art(tab.basis[r]) {
                if let Some(c) = (0..n + slacks).find(|&j| tab.t[r][j].abs() > 1e-9) {
                    tab.pivot(r, c);
                }
            }
        }
    }
    let cost: Vec<f64> = (0..cols).map(|j| if j < n { c[j] } else { 0.0 }).collect();
    tab.optimize(&cost, &|j| !is_art(j))?;

    let mut x = vec![0.0; n];
    for (row, &b) in tab.t.iter().zip(&tab.basis) {
        if b < n {
            x[b] = row[cols];
        }
    }
    let objective: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    let mut residual = x.iter().fold(0.0f64, |m, v| m.max(-v));
    for row in rows {
        let lhs: f64 = row.coefs.iter().zip(&x).map(|(a, b)| a * b).sum();
        let viol = match row.rel {
            Relation::Le => lhs - row.rhs,
            Relation::Ge => row.rhs - lhs,
            Relation::Eq => (lhs - row.rhs).abs(),
        };
        residual = residual.max(viol);
    }
    Ok(LpSolution { x, objective, residual })
}

/// Minimax strategies of the zero-sum game with row-player payoff `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeLp {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub value: f64,
}

fn accept(sol: LpSolution, what: &str) -> Result<LpSolution> {
    if sol.residual > 1e-8 {
        return Err(VmgError::LpFailure(format!("{what}: residual {:e}", sol.residual)));
    }
    Ok(sol)
}

/// Classical minimax LP on a shifted, strictly positive copy of `a`.
pub fn exact_ne_lp(a: &[Vec<f64>]) -> Result<NeLp> {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    if m == 0 || n == 0 || a.iter().any(|r| r.len() != n) {
        return Err(VmgError::LpFailure("payoff matrix must be non-empty and rectangular".into()));
    }
    if a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(VmgError::LpFailure("non-finite payoff".into()));
    }
    let lo = a.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - lo;

    // row player: max v  s.t.  sum_i mu_i A'_ij >= v,  sum mu = 1
    let mut rows = Vec::with_capacity(n + 1);
    for j in 0..n {
        let mut coefs: Vec<f64> = (0..m).map(|i| a[i][j] + shift).collect();
        coefs.push(-1.0);
        rows.push(LpRow { coefs, rel: Relation::Ge, rhs: 0.0 });
    }
    let mut simplex_row = vec![1.0; m];
    simplex_row.push(0.0);
    rows.push(LpRow { coefs: simplex_row, rel: Relation::Eq, rhs: 1.0 });
    let mut c = vec![0.0; m];
    c.push(1.0);
    let row_sol = accept(maximize(&c, &rows)?, "row player")?;

    // column player: max -w  s.t.  sum_j A'_ij nu_j <= w,  sum nu = 1
    let mut rows = Vec::with_capacity(m + 1);
    for row in a {
        let mut coefs: Vec<f64> = row.iter().map(|v| v + shift).collect();
        coefs.push(-1.0);
        rows.push(LpRow { coefs, rel: Relation::Le, rhs: 0.0 });
    }
    let mut simplex_row = vec![1.0; n];
    simplex_row.push(0.0);
    rows.push(LpRow { coefs: simplex_row, rel: Relation::Eq, rhs: 1.0 });
    let mut c = vec![0.0; n];
    c.push(-1.0);
    let col_sol = accept(maximize(&c, &rows)?, "column player")?;

    let v = row_sol.x[m];
    let w = col_sol.x[n];
    if (v - w).abs() > 1e-8 * (1.0 + v.abs()) {
        return Err(VmgError::LpFailure(format!("primal {v} and dual {w} values disagree")));
    }
    let clean = |x: &[f64]| -> Vec<f64> {
        let y: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
        let s: f64 = y.iter().sum();
        y.into_iter().map(|v| v / s).collect()
    };
    Ok(NeLp { mu: clean(&row_sol.x[..m]), nu: clean(&col_sol.x[..n]), value: 0.5 * (v + w) - shift })
}

/// Joint action `idx` with player `n`'s digit set to `dev` (player 0 most significant).
fn swap_digit(sizes: &[usize], idx: usize, n: usize, dev: usize) -> usize {
    let stride: usize = sizes[n + 1..].iter().product();
    let current = (idx / stride) % sizes[n];
    idx - current * stride + dev * stride
}

/// Largest gain of a unilateral deviation to a fixed action, found by enumeration.
pub fn max_deviation_gain(sizes: &[usize], payoffs: &[Vec<f64>], x: &[f64]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (n, u) in payoffs.iter().enumerate() {
        let follow: f64 = x.iter().zip(u).map(|(p, v)| p * v).sum();
        for dev in 0..sizes[n] {
            let mut deviate = 0.0;
            for (idx, p) in x.iter().enumerate() {
                deviate += p * u[swap_digit(sizes, idx, n, dev)];
            }
            worst = worst.max(deviate - follow);
        }
    }
    worst
}

/// Welfare-maximizing coarse correlated equilibrium; `payoffs[n][a]` over joint actions.
pub fn exact_cce_lp(sizes: &[usize], payoffs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let total: usize = sizes.iter().product();
    if sizes.is_empty() || total == 0 || payoffs.len() != sizes.len() {
        return Err(VmgError::LpFailure("inconsistent stage game".into()));
    }
    if total > 64 {
        return Err(VmgError::SpaceTooLarge(total as u128));
    }
    if payoffs.iter().any(|u| u.len() != total) {
        return Err(VmgError::LpFailure("payoff length differs from the joint action count".into()));
    }
    let mut rows = vec![LpRow { coefs: vec![1.0; total], rel: Relation::Eq, rhs: 1.0 }];
    for (n, u) in payoffs.iter().enumerate() {
        for dev in 0..sizes[n] {
            let coefs = (0..total).map(|a| u[a] - u[swap_digit(sizes, a, n, dev)]).collect();
            rows.push(LpRow { coefs, rel: Relation::Ge, rhs: 0.0 });
        }
    }
    let c: Vec<f64> = (0..total).map(|a| payoffs.iter().map(|u| u[a]).sum()).collect();
    let sol = accept(maximize(&c, &rows)?, "CCE")?;
    Ok(sol.x)
}
