//! Probability-simplex algebra: normalization, softmax, entropies, argmax,
//! the Reverse Operation and complementary-label sampling.
//!
//! The Reverse Operation maps a class distribution `q` to `Norm(1 - q)`,
//! which equals `(1 - q_j) / (n - 1)` component-wise. It converts a
//! complementary-label distribution into its implied pseudo-label
//! distribution (and back), exactly reversing the rank order of classes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities inside logarithms are clamped to this floor; the losses
/// are undefined at exactly zero.
pub const LOG_CLAMP: f64 = 1e-12;

/// Tolerance on the simplex constraint `sum == 1`.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A class index in `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HardLabel(usize);

impl HardLabel {
    /// Builds a label, checking it against the class count.
    pub fn new(index: usize, n: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::Usage(format!(
                "label index {index} out of range for {n} classes"
            )));
        }
        Ok(HardLabel(index))
    }

    pub fn index(&self) -> usize {
        self.0
    }
}

/// An n-class probability distribution: non-negative entries summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVec(Vec<f64>);

impl TryFrom<Vec<f64>> for ProbVec {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        ProbVec::new(values)
    }
}

impl From<ProbVec> for Vec<f64> {
    fn from(p: ProbVec) -> Vec<f64> {
        p.0
    }
}

impl ProbVec {
    /// Validates the simplex invariants: entries in `[0, 1]`, sum within
    /// [`SUM_TOLERANCE`] of 1.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Usage("probability vector must be non-empty".into()));
        }
        for &v in &values {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::Usage(format!("entry {v} outside [0, 1]")));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Usage(format!("entries sum to {sum}, not 1")));
        }
        Ok(ProbVec(values))
    }

    /// The uniform distribution over `n` classes.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution needs at least one class");
        ProbVec(vec![1.0 / n as f64; n])
    }

    /// One-hot distribution at `label`.
    pub fn one_hot(label: HardLabel, n: usize) -> Result<Self> {
        if label.index() >= n {
            return Err(Error::Usage(format!(
                "one-hot index {} out of range for {n} classes",
                label.index()
            )));
        }
        let mut v = vec![0.0; n];
        v[label.index()] = 1.0;
        Ok(ProbVec(v))
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Normalizes a non-negative vector to the simplex: `x_i / sum(x)`.
    pub fn normalize(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Usage("cannot normalize an empty vector".into()));
        }
        let mut sum = 0.0;
        for &v in raw {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Degenerate(format!(
                    "normalize requires finite non-negative entries, got {v}"
                )));
            }
            sum += v;
        }
        if sum <= 0.0 {
            return Err(Error::Degenerate("normalize requires positive mass".into()));
        }
        Ok(ProbVec(raw.iter().map(|v| v / sum).collect()))
    }

    /// The Reverse Operation: `Norm(1 - q)`, equal to `(1 - q_j)/(n - 1)`.
    ///
    /// Reverses the rank order of classes and, for `n >= 5`, never
    /// decreases entropy.
    pub fn reverse(&self) -> Result<Self> {
        if self.n() < 2 {
            return Err(Error::Usage(
                "reverse operation needs at least 2 classes".into(),
            ));
        }
        let flipped: Vec<f64> = self.0.iter().map(|q| 1.0 - q).collect();
        ProbVec::normalize(&flipped)
    }

    /// Shannon entropy in nats, with `0 ln 0 = 0`. Lies in `[0, ln n]`.
    pub fn entropy(&self) -> f64 {
        -self
            .0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    /// Index of the maximal entry; ties break to the lowest index.
    pub fn argmax_label(&self) -> HardLabel {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v > self.0[best] {
                best = i;
            }
        }
        HardLabel(best)
    }

    /// Total variation distance to another distribution: half the L1 gap.
    pub fn total_variation(&self, other: &ProbVec) -> Result<f64> {
        if self.n() != other.n() {
            return Err(Error::Usage(format!(
                "total variation between {} and {} classes",
                self.n(),
                other.n()
            )));
        }
        Ok(0.5
            * self
                .0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

/// Cross-entropy against a hard target: `-ln pred[target]`, clamped.
pub fn cross_entropy_hard(target: HardLabel, pred: &ProbVec) -> f64 {
    -pred.values()[target.index()].max(LOG_CLAMP).ln()
}

/// Cross-entropy against a soft target: `-sum target_i ln pred_i`, clamped.
pub fn cross_entropy_soft(target: &ProbVec, pred: &ProbVec) -> f64 {
    assert_eq!(target.n(), pred.n(), "soft cross-entropy needs matching n");
    target
        .values()
        .iter()
        .zip(pred.values())
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &p)| -t * p.max(LOG_CLAMP).ln())
        .sum()
}

/// Numerically stable softmax; shift-invariant in the logits.
pub fn softmax(logits: &[f64]) -> Result<ProbVec> {
    if logits.is_empty() {
        return Err(Error::Usage("softmax of an empty logit vector".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("softmax received non-finite logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    ProbVec::normalize(&exps)
}

/// Draws a label uniformly from the `n - 1` classes different from `y`.
pub fn sample_complementary<R: Rng + ?Sized>(
    y: HardLabel,
    n: usize,
    rng: &mut R,
) -> Result<HardLabel> {
    if n < 2 {
        return Err(Error::Usage(
            "complementary labels need at least 2 classes".into(),
        ));
    }
    if y.index() >= n {
        return Err(Error::Usage(format!(
            "label {} out of range for {n} classes",
            y.index()
        )));
    }
    let k = rng.random_range(0..n - 1);
    Ok(HardLabel(if k >= y.index() { k + 1 } else { k }))
}
