//! Factor estimates and fit configuration.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The `(U, V)` estimate for one snapshot: `U` spans the row space (outgoing
/// edges), `V` the column space (incoming edges); the data is approximated by
/// `U V^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    u: Array2<f64>,
    v: Array2<f64>,
}

impl FactorPair {
    pub fn new(u: Array2<f64>, v: Array2<f64>) -> Result<Self> {
        if u.nrows() != v.nrows() || u.ncols() != v.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "U is {:?}, V is {:?}; factors must share both dimensions",
                u.dim(),
                v.dim()
            )));
        }
        if u.ncols() == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        for m in [&u, &v] {
            for &x in m.iter() {
                if !x.is_finite() {
                    return Err(Error::InvalidInput("factor entry is not finite".into()));
                }
                if x < 0.0 {
                    return Err(Error::InvalidInput("factor entry is negative".into()));
                }
            }
        }
        Ok(Self { u, v })
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn k(&self) -> usize {
        self.u.ncols()
    }

    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }

    pub fn v(&self) -> &Array2<f64> {
        &self.v
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>) {
        (self.u, self.v)
    }

    /// Reconstruction `U V^T`.
    pub fn product(&self) -> Array2<f64> {
        self.u.dot(&self.v.t())
    }
}

/// Per-snapshot factor pairs for a sequence fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSequence {
    pairs: Vec<FactorPair>,
}

impl FactorSequence {
    pub fn new(pairs: Vec<FactorPair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("factor sequence needs at least one pair".into()));
        }
        let (n, k) = (pairs[0].n(), pairs[0].k());
        for (t, p) in pairs.iter().enumerate() {
            if p.n() != n || p.k() != k {
                return Err(Error::DimensionMismatch(format!(
                    "pair {t} is {}x{}, expected {n}x{k}",
                    p.n(),
                    p.k()
                )));
            }
        }
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n(&self) -> usize {
        self.pairs[0].n()
    }

    pub fn k(&self) -> usize {
        self.pairs[0].k()
    }

    pub fn pairs(&self) -> &[FactorPair] {
        &self.pairs
    }

    pub fn into_pairs(self) -> Vec<FactorPair> {
        self.pairs
    }
}

/// Everything a fit needs besides the data.
///
/// `lambda_t` and `window` only matter for sequence fits; static fits ignore
/// them. `eps` is added to every multiplicative-update denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub k: usize,
    pub lambda_s: f64,
    pub lambda_t: f64,
    pub window: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub eps: f64,
}

impl FitConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            lambda_s: 0.0,
            lambda_t: 0.0,
            window: 2,
            max_iter: 500,
            tol: 1e-6,
            seed: 0,
            eps: 1e-12,
        }
    }

    pub fn with_lambda_s(mut self, lambda_s: f64) -> Self {
        self.lambda_s = lambda_s;
        self
    }

    pub fn with_lambda_t(mut self, lambda_t: f64) -> Self {
        self.lambda_t = lambda_t;
        self
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if !(self.lambda_s.is_finite() && self.lambda_s >= 0.0) {
            return Err(Error::InvalidConfig("lambda_s must be finite and >= 0".into()));
        }
        if !(self.lambda_t.is_finite() && self.lambda_t >= 0.0) {
            return Err(Error::InvalidConfig("lambda_t must be finite and >= 0".into()));
        }
        if self.window < 2 || self.window % 2 != 0 {
            return Err(Error::InvalidConfig("window must be an even integer >= 2".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be finite and > 0".into()));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::InvalidConfig("eps must be finite and > 0".into()));
        }
        Ok(())
    }
}

/// What a fit did: objective value after each full sweep, sweep count, and
/// whether the relative-change test fired before `max_iter`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

/// Seeded generator used for every factor initialization in the crate.
pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense positive random matrix with entries uniform on (0.1, 1.1), filled
/// row-major so the draw order is part of the output contract.
pub(crate) fn random_positive(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut m = Array2::zeros((n, k));
    for i in 0..n {
        for j in 0..k {
            m[[i, j]] = 0.1 + rng.gen::<f64>();
        }
    }
    m
}

/// One `(U, V)` initialization; `U` is drawn before `V`.
pub(crate) fn random_pair(n: usize, k: usize, rng: &mut ChaCha8Rng) -> (Array2<f64>, Array2<f64>) {
    let u = random_positive(n, k, rng);
    let v = random_positive(n, k, rng);
    (u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn pair_validation() {
        assert!(FactorPair::new(array![[1.0], [0.0]], array![[0.5], [2.0]]).is_ok());
        assert!(FactorPair::new(array![[1.0], [0.0]], array![[0.5, 1.0], [2.0, 0.0]]).is_err());
        assert!(FactorPair::new(array![[-1.0], [0.0]], array![[0.5], [2.0]]).is_err());
        assert!(FactorPair::new(array![[f64::NAN], [0.0]], array![[0.5], [2.0]]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::new(2).validate().is_ok());
        assert!(FitConfig::new(0).validate().is_err());
        assert!(FitConfig::new(2).with_lambda_s(-1.0).validate().is_err());
        assert!(FitConfig::new(2).with_window(3).validate().is_err());
        assert!(FitConfig::new(2).with_tol(0.0).validate().is_err());
    }

    #[test]
    fn initialization_is_seeded_and_positive() {
        let mut a = seeded_rng(7);
        let mut b = seeded_rng(7);
        let (ua, va) = random_pair(4, 2, &mut a);
        let (ub, vb) = random_pair(4, 2, &mut b);
        assert_eq!(ua, ub);
        assert_eq!(va, vb);
        assert!(ua.iter().chain(va.iter()).all(|&x| x > 0.1 && x < 1.1));
    }
}
