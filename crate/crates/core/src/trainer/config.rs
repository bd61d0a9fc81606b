//! Training-loop configuration.

use serde::{Deserialize, Serialize};

use crate::datasets::Augmenter;
use crate::error::{Error, Result};
use crate::numerics::optim::{DEFAULT_BASE_LR, DEFAULT_MOMENTUM, DEFAULT_WEIGHT_DECAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rda,
    Fixmatch,
    FixmatchDa,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Rda => "rda",
            Method::Fixmatch => "fixmatch",
            Method::FixmatchDa => "fixmatch_da",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rda" => Ok(Method::Rda),
            "fixmatch" => Ok(Method::Fixmatch),
            "fixmatch_da" => Ok(Method::FixmatchDa),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected rda, fixmatch or fixmatch_da)"
            ))),
        }
    }
}

/// Hyperparameters of one training run. The desk-scale defaults keep a
/// run in CPU minutes; the paper-scale values (`mu = 7`, `b = 64`, 1024
/// epochs) remain selectable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub method: Method,
    /// Class count.
    pub n: usize,
    /// Labeled batch size `B`.
    pub b: usize,
    /// Unlabeled ratio: the unlabeled batch holds `mu * b` samples.
    pub mu: usize,
    pub lambda_a: f64,
    pub lambda_cd: f64,
    pub lambda_ca: f64,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    /// Confidence threshold for the baselines; RDA ignores it.
    pub tau: f64,
    pub seed: u64,
    /// Trunk hidden widths; empty means heads act on the raw features.
    pub hidden: Vec<usize>,
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Batches remembered by the alignment trackers.
    pub tracker_window: usize,
    pub augment: Augmenter,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::Rda,
            n: 10,
            b: 16,
            mu: 4,
            lambda_a: 1.0,
            lambda_cd: 1.0,
            lambda_ca: 1.0,
            epochs: 60,
            steps_per_epoch: 64,
            tau: 0.95,
            seed: 1,
            hidden: vec![64, 64],
            base_lr: DEFAULT_BASE_LR,
            momentum: DEFAULT_MOMENTUM,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            tracker_window: 128,
            augment: Augmenter::default(),
        }
    }
}

impl TrainConfig {
    pub fn desk_defaults(method: Method, n: usize, seed: u64) -> Self {
        TrainConfig {
            method,
            n,
            seed,
            ..TrainConfig::default()
        }
    }

    pub fn unlabeled_batch(&self) -> usize {
        self.mu * self.b
    }

    pub fn total_steps(&self) -> usize {
        self.epochs * self.steps_per_epoch
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        if self.b < 1 || self.mu < 1 {
            return Err(Error::Config("batch size and mu must be at least 1".into()));
        }
        if self.steps_per_epoch < 1 {
            return Err(Error::Config("steps_per_epoch must be at least 1".into()));
        }
        for (name, l) in [
            ("lambda_a", self.lambda_a),
            ("lambda_cd", self.lambda_cd),
            ("lambda_ca", self.lambda_ca),
        ] {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::Config(format!("{name} must be >= 0, got {l}")));
            }
        }
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(Error::Config(format!("tau must be >= 0, got {}", self.tau)));
        }
        if !self.base_lr.is_finite() || self.base_lr <= 0.0 {
            return Err(Error::Config("base_lr must be positive".into()));
        }
        if self.tracker_window < 1 {
            return Err(Error::Config("tracker window must hold >= 1 batch".into()));
        }
        Ok(())
    }
}
