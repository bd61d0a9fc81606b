//! Multi-seed experiment orchestration: runs, per-seed CSVs, the JSON
//! summary and plots. Seeds run concurrently; each writes only into its
//! own seed-scoped subdirectory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rda_core::error::{Error, Result};
use rda_core::trainer::{train, RunMetrics};

use crate::config::ExperimentConfig;
use crate::csvio::write_metrics_csv;
use crate::plots::emit_plots;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// "ok", or the failure/abort description.
    pub status: String,
    pub final_accuracy: Option<f64>,
    pub final_marginal_tv: Option<f64>,
    pub csv: Option<PathBuf>,
}

impl SeedResult {
    pub fn completed(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub method: String,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedResult>,
    /// Mean/population-std over completed seeds.
    pub mean_accuracy: Option<f64>,
    pub std_accuracy: Option<f64>,
    pub mean_marginal_tv: Option<f64>,
    pub incomplete: bool,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
    (mean, var.sqrt())
}

/// Per-seed metrics of one finished experiment, alongside its summary.
pub struct ExperimentOutput {
    pub summary: ExperimentSummary,
    pub metrics: Vec<(u64, Option<RunMetrics>)>,
    pub dir: PathBuf,
}

/// Trains every seed, writes `seed_<s>/metrics.csv` (and plots), then the
/// joined `summary.json`. Failed seeds are recorded, not fatal.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(
        out_dir.join("config.json"),
        serde_json::to_string_pretty(config)?,
    )?;

    let results: Vec<(u64, std::result::Result<RunMetrics, String>, PathBuf)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let seed_dir = out_dir.join(format!("seed_{seed}"));
            let outcome = (|| -> Result<RunMetrics> {
                std::fs::create_dir_all(&seed_dir)?;
                let outcome = train(&config.run_spec(seed))?;
                let metrics = outcome.metrics;
                write_metrics_csv(&metrics, &seed_dir.join("metrics.csv"))?;
                if config.emit_plots {
                    emit_plots(&metrics, &seed_dir)?;
                }
                if let Some(reason) = outcome.aborted {
                    return Err(Error::Numerical(format!("aborted: {reason}")));
                }
                Ok(metrics)
            })();
            (seed, outcome.map_err(|e| e.to_string()), seed_dir)
        })
        .collect();

    let mut per_seed = Vec::with_capacity(results.len());
    let mut metrics_by_seed = Vec::with_capacity(results.len());
    for (seed, outcome, seed_dir) in results {
        match outcome {
            Ok(metrics) => {
                per_seed.push(SeedResult {
                    seed,
                    status: "ok".into(),
                    final_accuracy: metrics.final_accuracy(),
                    final_marginal_tv: metrics.final_marginal_tv(),
                    csv: Some(seed_dir.join("metrics.csv")),
                });
                metrics_by_seed.push((seed, Some(metrics)));
            }
            Err(reason) => {
                per_seed.push(SeedResult {
                    seed,
                    status: reason,
                    final_accuracy: None,
                    final_marginal_tv: None,
                    csv: None,
                });
                metrics_by_seed.push((seed, None));
            }
        }
    }

    let finals: Vec<f64> = per_seed.iter().filter_map(|r| r.final_accuracy).collect();
    let tvs: Vec<f64> = per_seed.iter().filter_map(|r| r.final_marginal_tv).collect();
    let (mean_accuracy, std_accuracy) = if finals.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&finals);
        (Some(m), Some(s))
    };
    let mean_marginal_tv = if tvs.is_empty() {
        None
    } else {
        Some(mean_std(&tvs).0)
    };

    let summary = ExperimentSummary {
        method: config.train.method.name().to_string(),
        seeds: config.seeds.clone(),
        incomplete: per_seed.iter().any(|r| !r.completed()),
        per_seed,
        mean_accuracy,
        std_accuracy,
        mean_marginal_tv,
    };
    std::fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;

    Ok(ExperimentOutput {
        summary,
        metrics: metrics_by_seed,
        dir: out_dir.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rda_core::datasets::Protocol;
    use rda_core::trainer::{Method, SourceParams, TrainConfig};

    fn tiny_config(seeds: Vec<u64>) -> ExperimentConfig {
        ExperimentConfig {
            dataset: rda_core::datasets::DatasetSpec {
                protocol: Protocol::Matched { labels: 10 },
                m0: 20,
                n: 5,
            },
            source: SourceParams {
                dim: 2,
                spread: 1.0,
                test_per_class: 10,
            },
            train: TrainConfig {
                method: Method::Rda,
                n: 5,
                b: 4,
                mu: 2,
                epochs: 1,
                steps_per_epoch: 2,
                hidden: vec![8],
                ..TrainConfig::default()
            },
            seeds,
            output_dir: None,
            emit_plots: false,
        }
    }

    #[test]
    fn single_seed_reports_zero_std() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&tiny_config(vec![1]), dir.path()).unwrap();
        assert_eq!(out.summary.std_accuracy, Some(0.0));
        assert!(!out.summary.incomplete);
        assert!(dir.path().join("seed_1/metrics.csv").exists());
        assert!(dir.path().join("summary.json").exists());
    }

    #[test]
    fn identical_seed_values_give_zero_variance() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&tiny_config(vec![4, 4, 4]), dir.path()).unwrap();
        assert_eq!(out.summary.std_accuracy, Some(0.0));
    }

    #[test]
    fn summary_matches_recomputation_from_emitted_csvs() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&tiny_config(vec![1, 2, 3]), dir.path()).unwrap();
        let mut finals = Vec::new();
        for seed in [1u64, 2, 3] {
            let text =
                std::fs::read_to_string(dir.path().join(format!("seed_{seed}/metrics.csv")))
                    .unwrap();
            let parsed = crate::csvio::parse_metrics_csv(&text).unwrap();
            finals.push(parsed.final_row().unwrap().accuracy);
        }
        let (mean, std) = mean_std(&finals);
        assert!((out.summary.mean_accuracy.unwrap() - mean).abs() < 1e-12);
        assert!((out.summary.std_accuracy.unwrap() - std).abs() < 1e-12);
    }
}
