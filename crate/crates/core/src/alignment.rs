//! Running prediction-marginal tracking and the alignment operators.
//!
//! A [`DistributionTracker`] keeps the per-batch mean prediction over the
//! last `capacity` batches (128 by default) and reports their average —
//! the moving estimate written `Ψ(·)`. Reciprocal alignment rescales a
//! prediction by the ratio of the opposite head's reversed marginal to its
//! own marginal; prior alignment rescales by a fixed class prior instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probvec::ProbVec;

/// Number of batches remembered by default.
pub const DEFAULT_WINDOW: usize = 128;

/// Tracker means are floored at this value before division so a class
/// that was never predicted cannot zero out the ratio.
pub const MEAN_FLOOR: f64 = 1e-8;

/// Windowed mean of batch-average predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionTracker {
    n: usize,
    capacity: usize,
    /// Oldest batch mean first; never exceeds `capacity` entries.
    window: Vec<ProbVec>,
}

impl DistributionTracker {
    pub fn new(n: usize) -> Self {
        DistributionTracker::with_capacity(n, DEFAULT_WINDOW)
    }

    pub fn with_capacity(n: usize, capacity: usize) -> Self {
        assert!(n > 0 && capacity > 0, "tracker needs n > 0 and capacity > 0");
        DistributionTracker {
            n,
            capacity,
            window: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn recorded(&self) -> usize {
        self.window.len()
    }

    pub fn window(&self) -> &[ProbVec] {
        &self.window
    }

    /// Records the arithmetic mean of a batch of predictions, evicting the
    /// oldest batch once the window is full.
    pub fn update(&mut self, batch_preds: &[ProbVec]) -> Result<()> {
        if batch_preds.is_empty() {
            return Err(Error::Usage("tracker update with an empty batch".into()));
        }
        if batch_preds.iter().any(|p| p.n() != self.n) {
            return Err(Error::Usage(format!(
                "tracker expects {}-class predictions",
                self.n
            )));
        }
        let mut mean = vec![0.0; self.n];
        for p in batch_preds {
            for (m, &v) in mean.iter_mut().zip(p.values()) {
                *m += v;
            }
        }
        let inv = 1.0 / batch_preds.len() as f64;
        for m in &mut mean {
            *m *= inv;
        }
        self.push_mean(ProbVec::normalize(&mean)?);
        Ok(())
    }

    /// Appends an already-computed batch mean.
    pub fn push_mean(&mut self, mean: ProbVec) {
        assert_eq!(mean.n(), self.n, "batch mean has wrong class count");
        if self.window.len() == self.capacity {
            self.window.remove(0);
        }
        self.window.push(mean);
    }

    /// Mean of the stored batch means, renormalized; uniform when empty.
    pub fn mean(&self) -> ProbVec {
        if self.window.is_empty() {
            return ProbVec::uniform(self.n);
        }
        let mut acc = vec![0.0; self.n];
        for p in &self.window {
            for (a, &v) in acc.iter_mut().zip(p.values()) {
                *a += v;
            }
        }
        ProbVec::normalize(&acc).expect("window means have positive mass")
    }
}

/// The four trackers used by reciprocal alignment: marginals of `p`, `q`
/// and their reversed versions, all over the same batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentState {
    pub tracker_p: DistributionTracker,
    pub tracker_q: DistributionTracker,
    pub tracker_p_rev: DistributionTracker,
    pub tracker_q_rev: DistributionTracker,
}

impl AlignmentState {
    pub fn new(n: usize) -> Self {
        AlignmentState::with_capacity(n, DEFAULT_WINDOW)
    }

    pub fn with_capacity(n: usize, capacity: usize) -> Self {
        AlignmentState {
            tracker_p: DistributionTracker::with_capacity(n, capacity),
            tracker_q: DistributionTracker::with_capacity(n, capacity),
            tracker_p_rev: DistributionTracker::with_capacity(n, capacity),
            tracker_q_rev: DistributionTracker::with_capacity(n, capacity),
        }
    }

    pub fn n(&self) -> usize {
        self.tracker_p.n()
    }

    /// Records one batch of weak-augmentation predictions from both heads,
    /// together with their reversed versions, keeping all four windows in
    /// lockstep.
    pub fn record_batch(&mut self, p_batch: &[ProbVec], q_batch: &[ProbVec]) -> Result<()> {
        if p_batch.len() != q_batch.len() {
            return Err(Error::Usage(
                "p and q batches must have the same length".into(),
            ));
        }
        let p_rev: Vec<ProbVec> = p_batch
            .iter()
            .map(|p| p.reverse())
            .collect::<Result<_>>()?;
        let q_rev: Vec<ProbVec> = q_batch
            .iter()
            .map(|q| q.reverse())
            .collect::<Result<_>>()?;
        self.tracker_p.update(p_batch)?;
        self.tracker_q.update(q_batch)?;
        self.tracker_p_rev.update(&p_rev)?;
        self.tracker_q_rev.update(&q_rev)?;
        Ok(())
    }
}

fn scaled(p: &ProbVec, numerator: &ProbVec, denominator: &ProbVec) -> Result<ProbVec> {
    if p.n() != numerator.n() || p.n() != denominator.n() {
        return Err(Error::Usage("alignment class counts disagree".into()));
    }
    let scaled: Vec<f64> = p
        .values()
        .iter()
        .zip(numerator.values())
        .zip(denominator.values())
        .map(|((&v, &num), &den)| v * num.max(MEAN_FLOOR) / den.max(MEAN_FLOOR))
        .collect();
    ProbVec::normalize(&scaled)
}

/// Aligned pseudo-label: `Norm(p * Ψ(q̄) / Ψ(p))`.
pub fn reciprocal_align_p(p: &ProbVec, state: &AlignmentState) -> Result<ProbVec> {
    scaled(p, &state.tracker_q_rev.mean(), &state.tracker_p.mean())
}

/// Aligned complementary label: `Norm(q * Ψ(p̄) / Ψ(q))`.
pub fn reciprocal_align_q(q: &ProbVec, state: &AlignmentState) -> Result<ProbVec> {
    scaled(q, &state.tracker_p_rev.mean(), &state.tracker_q.mean())
}

/// Traditional distribution alignment: `Norm(p * prior / Ψ(p))`.
pub fn prior_align(p: &ProbVec, prior: &ProbVec, tracker_p: &DistributionTracker) -> Result<ProbVec> {
    scaled(p, prior, &tracker_p.mean())
}
