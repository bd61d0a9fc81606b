//! End-to-end sanity: reciprocal alignment learns linearly separable
//! two-class blobs from four labels.

use rda_core::datasets::{DatasetSpec, Protocol};
use rda_core::trainer::{train, Method, RunSpec, SourceParams, TrainConfig};

#[test]
fn rda_solves_two_separable_blobs_with_four_labels() {
    let spec = RunSpec {
        dataset: DatasetSpec {
            protocol: Protocol::Matched { labels: 4 },
            m0: 250,
            n: 2,
        },
        source: SourceParams {
            dim: 2,
            spread: 1.0,
            test_per_class: 200,
        },
        train: TrainConfig {
            method: Method::Rda,
            n: 2,
            epochs: 50,
            seed: 1,
            ..TrainConfig::default()
        },
    };
    let outcome = train(&spec).unwrap();
    assert!(outcome.aborted.is_none());
    let best = outcome
        .metrics
        .records
        .iter()
        .map(|r| r.accuracy)
        .fold(0.0, f64::max);
    let final_acc = outcome.metrics.final_accuracy().unwrap();
    assert!(
        final_acc >= 0.95,
        "final accuracy {final_acc} (best seen {best})"
    );
}
