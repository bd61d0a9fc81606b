//! Dense linear algebra, the two-headed MLP with manual backpropagation,
//! SGD with momentum/weight decay, and the cosine learning-rate schedule.

pub mod gradcheck;
pub mod matrix;
pub mod mlp;
pub mod optim;

pub use gradcheck::{grad_check, DifferentiableLoss, GradCheckReport, FD_STEP};
pub use matrix::Matrix;
pub use mlp::{backward, forward_two_head, DenseLayer, ForwardCache, ModelParams};
pub use optim::{lr_at, sgd_step, LrSchedule, OptimizerState};
