//! Training loops: the reciprocal-alignment method, the FixMatch-style
//! baseline with and without traditional distribution alignment, and
//! evaluation.

pub mod config;
pub mod eval;
pub mod metrics;
pub mod run;
pub mod step;

pub use config::{Method, TrainConfig};
pub use eval::{evaluate, EvalReport};
pub use metrics::{EpochRecord, RunMetrics};
pub use run::{train, Checkpoint, MethodAlign, RunSpec, SourceParams, TrainOutcome, Trainer};
pub use step::{
    fixmatch_da_step, fixmatch_step, gradcheck_fixture, rda_step, LossComponents, StepLoss,
    StepOutput, StepRngs,
};
