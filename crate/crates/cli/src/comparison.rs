//! Side-by-side method comparison on identical datasets and seeds.

use std::path::Path;

use rda_core::error::{Error, Result};
use rda_core::trainer::Method;

use crate::config::ExperimentConfig;
use crate::runner::{run_experiment, ExperimentSummary};

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub method: Method,
    pub mean_accuracy: Option<f64>,
    pub std_accuracy: Option<f64>,
    pub mean_marginal_tv: Option<f64>,
    pub accuracy_winner: bool,
    pub tv_winner: bool,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub summaries: Vec<ExperimentSummary>,
}

impl Comparison {
    /// Plain-text table, one row per method, winners flagged with `*`.
    pub fn table(&self) -> String {
        let mut out = String::from(
            "method        mean_acc   std_acc    mean_tv    best_acc best_tv\n",
        );
        for row in &self.rows {
            let f = |v: Option<f64>| match v {
                Some(v) => format!("{v:<10.4}"),
                None => format!("{:<10}", "-"),
            };
            out.push_str(&format!(
                "{:<13} {} {} {} {:<8} {}\n",
                row.method.name(),
                f(row.mean_accuracy),
                f(row.std_accuracy),
                f(row.mean_marginal_tv),
                if row.accuracy_winner { "*" } else { "" },
                if row.tv_winner { "*" } else { "" },
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("method,mean_accuracy,std_accuracy,mean_marginal_tv,best_acc,best_tv\n");
        for row in &self.rows {
            let f = |v: Option<f64>| v.map_or(String::from("nan"), |v| format!("{v:.17e}"));
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.method.name(),
                f(row.mean_accuracy),
                f(row.std_accuracy),
                f(row.mean_marginal_tv),
                row.accuracy_winner,
                row.tv_winner
            ));
        }
        out
    }
}

/// Runs each method with the shared config (identical datasets and seeds)
/// and assembles the comparison table. Emits `comparison.csv` plus one
/// experiment directory per method.
pub fn compare(methods: &[Method], config: &ExperimentConfig, out_dir: &Path) -> Result<Comparison> {
    if methods.len() < 2 {
        return Err(Error::Usage("compare needs at least 2 methods".into()));
    }
    std::fs::create_dir_all(out_dir)?;

    let mut summaries = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut method_config = config.clone();
        method_config.train.method = method;
        let output = run_experiment(&method_config, &out_dir.join(method.name()))?;
        summaries.push(output.summary);
    }

    let best_acc = summaries
        .iter()
        .filter_map(|s| s.mean_accuracy)
        .fold(f64::NEG_INFINITY, f64::max);
    let best_tv = summaries
        .iter()
        .filter_map(|s| s.mean_marginal_tv)
        .fold(f64::INFINITY, f64::min);

    let rows = methods
        .iter()
        .zip(&summaries)
        .map(|(&method, s)| ComparisonRow {
            method,
            mean_accuracy: s.mean_accuracy,
            std_accuracy: s.std_accuracy,
            mean_marginal_tv: s.mean_marginal_tv,
            accuracy_winner: s.mean_accuracy == Some(best_acc),
            tv_winner: s.mean_marginal_tv == Some(best_tv),
        })
        .collect();

    let comparison = Comparison { rows, summaries };
    std::fs::write(out_dir.join("comparison.csv"), comparison.to_csv())?;
    Ok(comparison)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rda_core::datasets::{DatasetSpec, Protocol};
    use rda_core::trainer::{SourceParams, TrainConfig};

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetSpec {
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
                n: 5,
                b: 4,
                mu: 2,
                epochs: 1,
                steps_per_epoch: 2,
                hidden: vec![8],
                ..TrainConfig::default()
            },
            seeds: vec![1, 2],
            output_dir: None,
            emit_plots: false,
        }
    }

    #[test]
    fn identical_methods_produce_identical_columns() {
        let dir = tempfile::tempdir().unwrap();
        let cmp = compare(&[Method::Rda, Method::Rda], &tiny_config(), dir.path()).unwrap();
        assert_eq!(cmp.rows.len(), 2);
        assert_eq!(cmp.rows[0].mean_accuracy, cmp.rows[1].mean_accuracy);
        assert_eq!(cmp.rows[0].mean_marginal_tv, cmp.rows[1].mean_marginal_tv);
    }

    #[test]
    fn emitted_csv_reparses_to_the_same_values() {
        let dir = tempfile::tempdir().unwrap();
        let cmp = compare(&[Method::Rda, Method::Fixmatch], &tiny_config(), dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("method,mean_accuracy"));
        for (line, row) in lines.zip(&cmp.rows) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[0], row.method.name());
            let acc: f64 = fields[1].parse().unwrap();
            assert_eq!(acc.to_bits(), row.mean_accuracy.unwrap().to_bits());
        }
    }

    #[test]
    fn single_method_comparison_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(compare(&[Method::Rda], &tiny_config(), dir.path()).is_err());
    }
}
