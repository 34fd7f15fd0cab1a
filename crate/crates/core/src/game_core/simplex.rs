use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result, VmgError};

/// Absolute tolerance on the total mass of a simplex point.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Drift accepted (and renormalized away) when constructing from solver output.
const CONSTRUCT_TOL: f64 = 1e-9;

/// A probability vector over a finite index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Simplex(Vec<f64>);

impl Simplex {
    /// Validates and renormalizes `weights`. Entries may be slightly negative
    /// (above `-1e-12`) and the sum may drift by up to `1e-9`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(VmgError::InvalidSimplex("empty".into()));
        }
        let mut w = weights;
        for (i, x) in w.iter_mut().enumerate() {
            if !x.is_finite() {
                return Err(VmgError::NonFiniteInput { index: i });
            }
            if *x < -SIMPLEX_TOL {
                return Err(VmgError::InvalidSimplex(format!("entry {i} is negative ({x})")));
            }
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > CONSTRUCT_TOL {
            return Err(VmgError::InvalidSimplex(format!("entries sum to {total}")));
        }
        for x in &mut w {
            *x /= total;
        }
        Ok(Simplex(w))
    }

    /// Normalizes nonnegative weights with positive total mass.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(VmgError::InvalidSimplex(format!("weights sum to {total}")));
        }
        Simplex::new(weights.into_iter().map(|x| x / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Simplex(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Simplex(w)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn min_entry(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl std::ops::Index<usize> for Simplex {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Simplex {
    type Error = VmgError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Simplex::new(v)
    }
}

impl From<Simplex> for Vec<f64> {
    fn from(s: Simplex) -> Vec<f64> {
        s.0
    }
}

/// `KL(p || q) = sum_i p_i log(p_i / q_i)` with `0 log 0 = 0`.
pub fn kl_divergence(p: &Simplex, q: &Simplex) -> Result<f64> {
    check_len(p.len(), q.len())?;
    kl_slices(p.as_slice(), q.as_slice())
}

pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut kl = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(VmgError::AbsoluteContinuityViolation { index: i });
            }
            kl += pi * (pi / qi).ln();
        }
    }
    // Clamp rounding noise; KL is nonnegative.
    Ok(kl.max(0.0))
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(v: &[f64]) -> Result<Simplex> {
    if v.is_empty() {
        return Err(VmgError::InvalidSimplex("empty".into()));
    }
    project_simplex_into(v).map(Simplex)
}

pub(crate) fn project_simplex_into(v: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(VmgError::NonFiniteInput { index: i });
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            tau = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|&x| (x - tau).max(0.0)).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn construction_checks() {
        assert!(Simplex::new(vec![0.5, 0.5]).is_ok());
        assert!(Simplex::new(vec![0.6, 0.6]).is_err());
        assert!(Simplex::new(vec![-0.1, 1.1]).is_err());
        assert!(Simplex::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Simplex::new(vec![]).is_err());
        let s = Simplex::new(vec![0.5 + 1e-10, 0.5]).unwrap();
        assert!((s.as_slice().iter().sum::<f64>() - 1.0).abs() < SIMPLEX_TOL);
        let w = Simplex::from_weights(vec![1.0, 3.0]).unwrap();
        assert_eq!(w.as_slice(), &[0.25, 0.75]);
    }

    #[test]
    fn kl_examples() {
        let half = Simplex::uniform(2);
        assert_eq!(kl_divergence(&half, &half).unwrap(), 0.0);
        let point = Simplex::point_mass(2, 0);
        assert!((kl_divergence(&point, &half).unwrap() - 2f64.ln()).abs() < 1e-15);
        // 0.7 ln 1.4 + 0.3 ln 0.6, summed directly
        let p = Simplex::new(vec![0.7, 0.3]).unwrap();
        let expected = 0.7 * (0.7f64 / 0.5).ln() + 0.3 * (0.3f64 / 0.5).ln();
        let got = kl_divergence(&p, &half).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.082282).abs() < 1e-6);
    }

    #[test]
    fn kl_errors() {
        let a = Simplex::uniform(2);
        let b = Simplex::uniform(3);
        assert!(matches!(kl_divergence(&a, &b), Err(VmgError::DimensionMismatch { .. })));
        assert_eq!(
            kl_divergence(&a, &Simplex::point_mass(2, 0)),
            Err(VmgError::AbsoluteContinuityViolation { index: 1 })
        );
        // q_i = 0 with p_i = 0 is fine
        assert_eq!(kl_divergence(&Simplex::point_mass(2, 0), &Simplex::point_mass(2, 0)).unwrap(), 0.0);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_simplex(&[2.0, 0.0]).unwrap().as_slice(), &[1.0, 0.0]);
        let p = project_simplex(&[0.6, 0.6]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        let q = project_simplex(&[0.2, 0.3, 0.5]).unwrap();
        assert!(crate::linalg::max_abs_diff(q.as_slice(), &[0.2, 0.3, 0.5]) < 1e-15);
        assert_eq!(project_simplex(&[1.0, f64::INFINITY]), Err(VmgError::NonFiniteInput { index: 1 }));
    }

    fn dist2(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    proptest! {
        #[test]
        fn kl_nonnegative_zero_iff_equal(a in prop::collection::vec(0.01f64..1.0, 4),
                                         b in prop::collection::vec(0.01f64..1.0, 4)) {
            let p = Simplex::from_weights(a).unwrap();
            let q = Simplex::from_weights(b).unwrap();
            let kl = kl_divergence(&p, &q).unwrap();
            prop_assert!(kl >= 0.0);
            prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-12);
            if crate::linalg::max_abs_diff(p.as_slice(), q.as_slice()) > 1e-3 {
                prop_assert!(kl > 1e-12);
            }
        }

        #[test]
        fn projection_is_valid_and_idempotent(v in prop::collection::vec(-3.0f64..3.0, 1..8)) {
            let p = project_simplex(&v).unwrap();
            prop_assert!(p.as_slice().iter().all(|&x| x >= 0.0));
            prop_assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < SIMPLEX_TOL);
            let pp = project_simplex(p.as_slice()).unwrap();
            prop_assert!(crate::linalg::max_abs_diff(p.as_slice(), pp.as_slice()) < 1e-12);
        }

        #[test]
        fn projection_beats_grid(v in prop::collection::vec(-2.0f64..2.0, 3)) {
            let p = project_simplex(&v).unwrap();
            let best = dist2(p.as_slice(), &v);
            let steps = 200;
            let h = 1.0 / steps as f64;
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let g = [i as f64 * h, j as f64 * h, 1.0 - (i + j) as f64 * h];
                    prop_assert!(best <= dist2(&g, &v) + 1e-12);
                }
            }
        }
    }
}
