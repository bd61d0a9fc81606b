//! Reciprocal distribution alignment for semi-supervised learning at desk
//! scale.
//!
//! Two classifier heads share one MLP trunk: the default head predicts
//! pseudo-labels, the auxiliary head predicts complementary labels. The
//! reverse operation `q -> Norm(1 - q)` converts between the two label
//! views while exactly reversing class rank order, and each head's
//! prediction marginal is rescaled toward the reversed marginal of the
//! other — no class prior required, so the scheme survives labeled and
//! unlabeled sets with mismatched class distributions.
//!
//! The crate provides the simplex algebra and reverse operation
//! ([`probvec`]), the moving-marginal trackers and alignment operators
//! ([`alignment`]), a dense two-headed MLP with manual backpropagation
//! ([`numerics`]), synthetic mismatched-distribution dataset protocols
//! ([`datasets`]) and the training loops ([`trainer`]).

pub mod alignment;
pub mod datasets;
pub mod error;
pub mod numerics;
pub mod probvec;
pub mod trainer;

pub use alignment::{
    prior_align, reciprocal_align_p, reciprocal_align_q, AlignmentState, DistributionTracker,
};
pub use error::{Error, Result};
pub use numerics::{
    backward, forward_two_head, grad_check, lr_at, sgd_step, DenseLayer, DifferentiableLoss,
    GradCheckReport, LrSchedule, Matrix, ModelParams, OptimizerState,
};
pub use probvec::{
    cross_entropy_hard, cross_entropy_soft, sample_complementary, softmax, HardLabel, ProbVec,
};
pub use trainer::{
    evaluate, train, Checkpoint, EpochRecord, EvalReport, Method, RunMetrics, RunSpec,
    SourceParams, TrainConfig, TrainOutcome, Trainer,
};
pub use datasets::{DatasetSpec, Protocol, SplitCounts, SyntheticSource};
