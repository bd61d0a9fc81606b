//! Synthetic data generation and the paper's class-distribution protocols.

pub mod augment;
pub mod protocol;
pub mod synth;

pub use augment::{AugmentMode, Augmenter};
pub use protocol::{
    darp_counts, even_split, gamma_search, split_counts, top_up, unlabeled_counts_reversed,
    DatasetSpec, Protocol, SplitCounts,
};
pub use synth::{
    export_csv, materialize, LabeledExample, MaterializedData, SyntheticSource, TestExample,
    UnlabeledExample, DEFAULT_TEST_PER_CLASS, RING_RADIUS,
};
