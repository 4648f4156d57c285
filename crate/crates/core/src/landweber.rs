//! Preconditioned Landweber iteration and its spectral filters.
//!
//! For a system `X` with preconditioner `P = chi (-Delta_g) chi` the update is
//!
//! ```text
//! f_k = f_{k-1} - gamma X*X P X* (X f_{k-1} - psi),   f_0 = 0,
//! ```
//!
//! the plain Landweber scheme for `L = P^{1/2} X*X` and data `P^{1/2} X* psi`.
//! The square root never has to be formed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::xray::OpNormEstimate;
use crate::{Error, Result};

/// A linear system on flat vectors with its inner products and a
/// self-adjoint, positive semidefinite preconditioner.
pub trait LandweberSystem {
    fn model_len(&self) -> usize;
    fn data_len(&self) -> usize;
    fn forward(&self, f: &[f64]) -> Vec<f64>;
    fn adjoint(&self, s: &[f64]) -> Vec<f64>;
    fn precondition(&self, g: &[f64]) -> Vec<f64>;
    fn model_dot(&self, a: &[f64], b: &[f64]) -> f64;
    fn data_dot(&self, a: &[f64], b: &[f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandweberConfig {
    pub gamma: f64,
    pub k_max: usize,
    /// Histories keep every `record_every`-th iterate (and the last one).
    pub record_every: usize,
    /// Iterations whose iterate is stored in full.
    pub snapshots: Vec<usize>,
}

impl LandweberConfig {
    pub fn new(gamma: f64, k_max: usize) -> Self {
        LandweberConfig {
            gamma,
            k_max,
            record_every: 1,
            snapshots: Vec::new(),
        }
    }

    pub fn with_snapshots(mut self, snapshots: &[usize]) -> Self {
        self.snapshots = snapshots.to_vec();
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.k_max == 0 || self.record_every == 0 {
            return Err(Error::InvalidArgument("k_max and record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// One recorded iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub k: usize,
    /// `||X f_k - psi||` in the data inner product.
    pub residual: f64,
    /// `<q, P q>^{1/2}` with `q = X*(X f_k - psi)`: the `H^1`-seminorm of
    /// `chi q`, equal to `||L f_k - m||`.
    pub preconditioned_residual: f64,
    /// `||f_k||` in the model inner product.
    pub iterate_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandweberState {
    pub iterate: Vec<f64>,
    pub k: usize,
    pub gamma: f64,
    pub history: Vec<HistoryEntry>,
    pub snapshots: Vec<(usize, Vec<f64>)>,
}

impl LandweberState {
    pub fn snapshot(&self, k: usize) -> Option<&[f64]> {
        self.snapshots.iter().find(|(j, _)| *j == k).map(|(_, v)| v.as_slice())
    }

    pub fn residual_history(&self) -> Vec<f64> {
        self.history.iter().map(|h| h.residual).collect()
    }

    pub fn preconditioned_residual_history(&self) -> Vec<f64> {
        self.history.iter().map(|h| h.preconditioned_residual).collect()
    }
}

/// Runs `cfg.k_max` preconditioned Landweber steps from `f_0 = 0`.
pub fn landweber_run<S: LandweberSystem + ?Sized>(
    sys: &S,
    psi: &[f64],
    cfg: &LandweberConfig,
) -> Result<LandweberState> {
    cfg.validate()?;
    if psi.len() != sys.data_len() {
        return Err(Error::ShapeMismatch {
            expected: (sys.data_len(), 1),
            found: (psi.len(), 1),
        });
    }
    let mut f = vec![0.0; sys.model_len()];
    let mut history = Vec::new();
    let mut snapshots = Vec::new();
    if cfg.snapshots.contains(&0) {
        snapshots.push((0, f.clone()));
    }
    for k in 1..=cfg.k_max + 1 {
        let prev = k - 1;
        let xf = sys.forward(&f);
        let r: Vec<f64> = xf.iter().zip(psi).map(|(a, b)| a - b).collect();
        let q = sys.adjoint(&r);
        let p = sys.precondition(&q);
        if prev % cfg.record_every == 0 || prev == cfg.k_max {
            let residual = libm::sqrt(sys.data_dot(&r, &r).max(0.0));
            let pres = libm::sqrt(sys.model_dot(&q, &p).max(0.0));
            let norm = libm::sqrt(sys.model_dot(&f, &f).max(0.0));
            if !(residual.is_finite() && pres.is_finite()) {
                return Err(Error::Diverged {
                    k: prev,
                    what: "non-finite residual".into(),
                });
            }
            history.push(HistoryEntry {
                k: prev,
                residual,
                preconditioned_residual: pres,
                iterate_norm: norm,
            });
        }
        if prev == cfg.k_max {
            break;
        }
        let step = sys.adjoint(&sys.forward(&p));
        for (fi, si) in f.iter_mut().zip(&step) {
            *fi -= cfg.gamma * si;
        }
        if let Some(i) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                k,
                what: format!("iterate entry {i} is not finite"),
            });
        }
        if cfg.snapshots.contains(&k) {
            snapshots.push((k, f.clone()));
        }
    }
    Ok(LandweberState {
        iterate: f,
        k: cfg.k_max,
        gamma: cfg.gamma,
        history,
        snapshots,
    })
}

/// Power iteration on `L*L = X*X P X*X` from a seeded Gaussian start.
/// Returns `||L||^2`; Rayleigh quotients are nondecreasing.
pub fn power_iteration<S: LandweberSystem + ?Sized>(sys: &S, iters: usize, seed: u64) -> Result<OpNormEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..sys.model_len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let apply = |v: &[f64]| {
        let n = sys.adjoint(&sys.forward(v));
        let p = sys.precondition(&n);
        sys.adjoint(&sys.forward(&p))
    };
    let mut rayleigh = Vec::with_capacity(iters);
    for k in 0..iters {
        let norm = libm::sqrt(sys.model_dot(&v, &v));
        if norm == 0.0 {
            rayleigh.push(0.0);
            break;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let w = apply(&v);
        let q = sys.model_dot(&v, &w);
        if !q.is_finite() {
            return Err(Error::Diverged {
                k,
                what: "power method produced a non-finite Rayleigh quotient".into(),
            });
        }
        rayleigh.push(q);
        v = w;
    }
    let value = rayleigh.last().copied().unwrap_or(0.0).max(0.0);
    Ok(OpNormEstimate { value, rayleigh })
}

/// `gamma = safety / ||L||^2`, inside the contraction range `(0, 2/||L||^2)`.
pub fn choose_gamma(opnorm_sq: f64, safety: f64) -> Result<f64> {
    if !(opnorm_sq > 0.0 && opnorm_sq.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "operator norm must be positive, got {opnorm_sq}"
        )));
    }
    if !(safety > 0.0 && safety < 1.0) {
        return Err(Error::InvalidArgument(format!("safety must be in (0, 1), got {safety}")));
    }
    Ok(safety / opnorm_sq)
}

pub const DEFAULT_SAFETY: f64 = 0.9;

/// `phi_k(lambda) = 1 - (1 - gamma lambda^2)^k`.
pub fn filter_phi(k: u32, gamma: f64, lambda: f64) -> f64 {
    let mut x = 1.0 - gamma * lambda * lambda;
    // At lambda = 1/sqrt(gamma) the product rounds to 1 +- ulp; phi is 1 there.
    if x.abs() <= 4.0 * f64::EPSILON {
        x = 0.0;
    }
    1.0 - powi(x, k)
}

/// `g_k(lambda) = phi_k(lambda) / lambda`, with `k gamma lambda` below 1e-8.
pub fn filter_g(k: u32, gamma: f64, lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return k as f64 * gamma * lambda;
    }
    filter_phi(k, gamma, lambda) / lambda
}

fn powi(mut x: f64, mut k: u32) -> f64 {
    let mut acc = 1.0;
    while k > 0 {
        if k & 1 == 1 {
            acc *= x;
        }
        x *= x;
        k >>= 1;
    }
    acc
}
