//! Deterministic numeric primitives: probability vectors, stable softmax,
//! cross-entropy, KL divergence, a seeded PRNG, SGD, and a finite-difference
//! gradient oracle. Everything accumulates in f64 with a fixed order so that
//! repeated runs are bit-identical.

mod gradcheck;
mod rng;
mod sgd;

pub use gradcheck::{finite_diff_gradient, max_rel_error, DEFAULT_FD_STEP};
pub use rng::RngState;
pub use sgd::{sgd_step, MomentumBuffer, SgdConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped to at least this before any `log`.
pub const PROB_EPS: f64 = 1e-12;

/// Pre-softmax scores over the answer-class set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitVector(pub Vec<f64>);

impl LogitVector {
    pub fn zeros(len: usize) -> Self {
        LogitVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logit vector".into()));
        }
        Ok(())
    }
}

/// A probability distribution over the answer classes: non-negative entries
/// summing to one within 1e-9. Zeros are stored exactly; the `PROB_EPS`
/// clamp is applied before every `log`, never to the stored values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Wraps raw values after checking the distribution invariants.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("probability vector".into()));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("negative probability".into()));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(ProbVector(values))
    }

    /// One-hot distribution on `class`.
    pub fn one_hot(len: usize, class: usize) -> Self {
        let mut v = vec![0.0; len];
        v[class] = 1.0;
        ProbVector(v)
    }

    /// Uniform distribution over `len` classes.
    pub fn uniform(len: usize) -> Self {
        ProbVector(vec![1.0 / len as f64; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry, ties broken by the lowest class index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// Numerically stable softmax; output entries are clamped to `>= PROB_EPS`.
pub fn softmax(z: &LogitVector) -> Result<ProbVector> {
    z.validate()?;
    if z.is_empty() {
        return Err(Error::InvalidInput("empty logit vector".into()));
    }
    let max = z.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.0.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v = (*v / sum).max(PROB_EPS);
    }
    Ok(ProbVector(out))
}

/// `-sum_a p_gt(a) * ln p(a)` with `p` clamped to `[PROB_EPS, 1]`.
pub fn cross_entropy(p_gt: &ProbVector, p: &ProbVector) -> Result<f64> {
    if p_gt.len() != p.len() {
        return Err(Error::DimensionMismatch {
            left: p_gt.len(),
            right: p.len(),
        });
    }
    let mut acc = 0.0;
    for (&g, &q) in p_gt.0.iter().zip(&p.0) {
        acc -= g * q.clamp(PROB_EPS, 1.0).ln();
    }
    Ok(acc)
}

/// Shannon entropy in nats.
pub fn entropy(p: &ProbVector) -> f64 {
    p.0.iter()
        .map(|&v| {
            let c = v.clamp(PROB_EPS, 1.0);
            -c * c.ln()
        })
        .sum()
}

/// `sum_a p_t(a) * ln(p_t(a) / p_s(a))`, both arguments clamped.
pub fn kl_divergence(p_t: &ProbVector, p_s: &ProbVector) -> Result<f64> {
    if p_t.len() != p_s.len() {
        return Err(Error::DimensionMismatch {
            left: p_t.len(),
            right: p_s.len(),
        });
    }
    let mut acc = 0.0;
    for (&t, &s) in p_t.0.iter().zip(&p_s.0) {
        let t = t.clamp(PROB_EPS, 1.0);
        let s = s.clamp(PROB_EPS, 1.0);
        acc += t * (t / s).ln();
    }
    Ok(acc)
}
