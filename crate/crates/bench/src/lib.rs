//! Shared fixtures for the criterion benchmarks.

use rda_core::datasets::{DatasetSpec, Protocol};
use rda_core::trainer::{Method, RunSpec, SourceParams, TrainConfig, Trainer};

/// A small but realistic training setup for step benchmarks.
pub fn bench_trainer(method: Method) -> Trainer {
    let spec = RunSpec {
        dataset: DatasetSpec {
            protocol: Protocol::ImbalancedLabeled {
                n0: 30,
                labels: 100,
            },
            m0: 100,
            n: 10,
        },
        source: SourceParams {
            dim: 2,
            spread: 1.0,
            test_per_class: 50,
        },
        train: TrainConfig {
            method,
            seed: 1,
            ..TrainConfig::default()
        },
    };
    Trainer::new(spec).expect("bench spec is valid")
}
