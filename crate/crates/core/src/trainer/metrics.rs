//! Per-run metric records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probvec::ProbVec;

/// One evaluated epoch. Loss fields are means over the epoch's steps;
/// the pseudo-label marginal pools the contributing pseudo-labels of the
/// whole epoch (aligned hard labels for RDA, mask-surviving ones for the
/// baselines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub accuracy: f64,
    pub loss_total: f64,
    pub loss_sd: f64,
    pub loss_sa: f64,
    pub loss_cd: f64,
    pub loss_ca: f64,
    pub pseudo_label_marginal: ProbVec,
    /// Total variation between the pooled pseudo-label marginal and the
    /// true unlabeled class marginal.
    pub marginal_tv: f64,
    /// Entropy of the mean prediction on unlabeled data.
    pub expected_pred_entropy: f64,
    /// Mean entropy of the per-sample predictions.
    pub mean_pred_entropy: f64,
    /// `expected_pred_entropy - mean_pred_entropy`; non-negative by Jensen.
    pub mutual_info_proxy: f64,
    /// Mean fraction of unlabeled samples contributing to the consistency
    /// loss (1 for RDA by construction).
    pub mask_rate: f64,
    /// Minimum step-level mask rate inside the epoch.
    pub min_step_mask_rate: f64,
}

/// The time series of a run plus the final evaluation details.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub n: usize,
    pub records: Vec<EpochRecord>,
    /// `(max predicted probability, prediction correct)` per test example,
    /// from the final evaluation.
    pub final_confidences: Vec<(f64, bool)>,
    pub final_per_class_accuracy: Vec<f64>,
    pub true_unlabeled_marginal: ProbVec,
}

impl RunMetrics {
    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.final_record().map(|r| r.accuracy)
    }

    pub fn final_marginal_tv(&self) -> Option<f64> {
        self.final_record().map(|r| r.marginal_tv)
    }

    /// Checks the documented ranges on every record.
    pub fn validate(&self) -> Result<()> {
        let ln_n = (self.n as f64).ln();
        let eps = 1e-9;
        for r in &self.records {
            if !(0.0..=1.0 + eps).contains(&r.marginal_tv) {
                return Err(Error::Numerical(format!(
                    "epoch {}: marginal_tv {} outside [0, 1]",
                    r.epoch, r.marginal_tv
                )));
            }
            for (name, h) in [
                ("expected_pred_entropy", r.expected_pred_entropy),
                ("mean_pred_entropy", r.mean_pred_entropy),
            ] {
                if !(-eps..=ln_n + eps).contains(&h) {
                    return Err(Error::Numerical(format!(
                        "epoch {}: {name} {h} outside [0, ln n]",
                        r.epoch
                    )));
                }
            }
            if !(-ln_n - eps..=ln_n + eps).contains(&r.mutual_info_proxy) {
                return Err(Error::Numerical(format!(
                    "epoch {}: mutual_info_proxy {} outside [-ln n, ln n]",
                    r.epoch, r.mutual_info_proxy
                )));
            }
            if r.mutual_info_proxy < 0.0 {
                return Err(Error::Numerical(format!(
                    "epoch {}: mutual_info_proxy {} negative",
                    r.epoch, r.mutual_info_proxy
                )));
            }
        }
        Ok(())
    }
}
