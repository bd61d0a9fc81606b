//! Experiment configuration: a JSON document mirroring the field names
//! below; command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rda_core::datasets::{DatasetSpec, Protocol};
use rda_core::error::{Error, Result};
use rda_core::trainer::{RunSpec, SourceParams, TrainConfig};

/// Environment variable holding the default output root.
pub const OUT_ROOT_ENV: &str = "RDA_OUT_ROOT";

pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub source: SourceParams,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub emit_plots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec {
                protocol: Protocol::Matched { labels: 100 },
                m0: 500,
                n: 10,
            },
            source: SourceParams::default(),
            train: TrainConfig::default(),
            seeds: DEFAULT_SEEDS.to_vec(),
            output_dir: None,
            emit_plots: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.run_spec(self.seeds[0]).validate()
    }

    /// The per-run spec for one seed.
    pub fn run_spec(&self, seed: u64) -> RunSpec {
        let mut train = self.train.clone();
        train.seed = seed;
        RunSpec {
            dataset: self.dataset.clone(),
            source: self.source,
            train,
        }
    }

    /// Resolves the output directory: explicit value, else `RDA_OUT_ROOT`.
    pub fn resolve_output_dir(&self) -> Result<PathBuf> {
        if let Some(dir) = &self.output_dir {
            return Ok(dir.clone());
        }
        match std::env::var_os(OUT_ROOT_ENV) {
            Some(root) => Ok(PathBuf::from(root).join("experiment")),
            None => Err(Error::Config(format!(
                "no output directory: pass --out or set {OUT_ROOT_ENV}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_preserves_the_config() {
        let mut config = ExperimentConfig::default();
        config.dataset.protocol = Protocol::MismatchedBoth {
            n0: 40,
            labels: 100,
            gamma: 10.0,
        };
        config.seeds = vec![7, 8];
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn partial_json_files_fall_back_to_defaults() {
        let json = r#"{"seeds": [3], "train": {"method": "fixmatch"}}"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(config.seeds, vec![3]);
        assert_eq!(config.train.method, rda_core::trainer::Method::Fixmatch);
        assert_eq!(config.train.b, 16);
        assert_eq!(config.dataset.m0, 500);
    }

    #[test]
    fn empty_seed_list_is_rejected() {
        let config = ExperimentConfig {
            seeds: vec![],
            ..ExperimentConfig::default()
        };
        assert!(config.validate().is_err());
    }
}
