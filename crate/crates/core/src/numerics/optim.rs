//! SGD with momentum and weight decay, plus the cosine learning-rate
//! schedule `lr(t) = base_lr * cos(7 pi t / (16 T))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::mlp::ModelParams;

pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_WEIGHT_DECAY: f64 = 0.0005;
pub const DEFAULT_BASE_LR: f64 = 0.03;

/// Momentum buffers plus the optimizer hyperparameters.
///
/// Weight decay is applied to every parameter, biases included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub momentum_buffers: ModelParams,
    pub momentum: f64,
    pub weight_decay: f64,
    pub base_lr: f64,
}

impl OptimizerState {
    pub fn new(model: &ModelParams, momentum: f64, weight_decay: f64, base_lr: f64) -> Self {
        OptimizerState {
            momentum_buffers: model.zeros_like(),
            momentum,
            weight_decay,
            base_lr,
        }
    }

    pub fn with_defaults(model: &ModelParams) -> Self {
        OptimizerState::new(model, DEFAULT_MOMENTUM, DEFAULT_WEIGHT_DECAY, DEFAULT_BASE_LR)
    }
}

/// One update: `v <- momentum v + g + weight_decay p; p <- p - lr v`.
pub fn sgd_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut OptimizerState,
    lr: f64,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.momentum_buffers) {
        return Err(Error::Config(
            "gradient/buffer shapes do not mirror the parameters".into(),
        ));
    }
    let momentum = state.momentum;
    let decay = state.weight_decay;
    for ((p_layer, g_layer), v_layer) in params
        .layers_mut()
        .into_iter()
        .zip(grads.layers())
        .zip(state.momentum_buffers.layers_mut())
    {
        for ((p, &g), v) in p_layer
            .weight
            .data_mut()
            .iter_mut()
            .zip(g_layer.weight.data())
            .zip(v_layer.weight.data_mut())
        {
            *v = momentum * *v + g + decay * *p;
            *p -= lr * *v;
        }
        for ((p, &g), v) in p_layer
            .bias
            .iter_mut()
            .zip(&g_layer.bias)
            .zip(v_layer.bias.iter_mut())
        {
            *v = momentum * *v + g + decay * *p;
            *p -= lr * *v;
        }
    }
    Ok(())
}

/// Cosine decay over a fixed horizon of optimizer steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub total_steps: usize,
}

/// Learning rate at `step`; strictly positive and non-increasing on
/// `[0, total_steps]`.
pub fn lr_at(schedule: &LrSchedule, step: usize) -> Result<f64> {
    if step > schedule.total_steps {
        return Err(Error::Usage(format!(
            "step {step} beyond schedule horizon {}",
            schedule.total_steps
        )));
    }
    let t = step as f64 / schedule.total_steps.max(1) as f64;
    Ok(schedule.base_lr * (7.0 * std::f64::consts::PI * t / 16.0).cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn scalar_model(value: f64) -> ModelParams {
        let mut m = ModelParams::zeros(1, &[], 1);
        *m.head_d.weight.at_mut(0, 0) = value;
        m
    }

    fn scalar_grad(value: f64) -> ModelParams {
        let mut g = ModelParams::zeros(1, &[], 1);
        *g.head_d.weight.at_mut(0, 0) = value;
        g
    }

    #[test]
    fn zero_gradient_zero_decay_is_a_noop() {
        let mut params = scalar_model(1.25);
        let grads = params.zeros_like();
        let mut state = OptimizerState::new(&params, 0.9, 0.0, 0.03);
        sgd_step(&mut params, &grads, &mut state, 0.1).unwrap();
        assert_eq!(params.head_d.weight.at(0, 0), 1.25);
    }

    #[test]
    fn plain_sgd_single_step() {
        let mut params = scalar_model(1.0);
        let grads = scalar_grad(1.0);
        let mut state = OptimizerState::new(&params, 0.0, 0.0, 0.1);
        sgd_step(&mut params, &grads, &mut state, 0.1).unwrap();
        assert!((params.head_d.weight.at(0, 0) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn momentum_recurrence_matches_hand_unroll() {
        // v1 = g1 + wd*p0;        p1 = p0 - lr*v1
        // v2 = 0.9 v1 + g2 + wd*p1; p2 = p1 - lr*v2
        let (p0, g1, g2, wd, lr) = (2.0, 0.5, -0.25, 0.01, 0.1);
        let v1 = g1 + wd * p0;
        let p1 = p0 - lr * v1;
        let v2 = 0.9 * v1 + g2 + wd * p1;
        let p2 = p1 - lr * v2;

        let mut params = scalar_model(p0);
        let mut state = OptimizerState::new(&params, 0.9, wd, lr);
        sgd_step(&mut params, &scalar_grad(g1), &mut state, lr).unwrap();
        assert!((params.head_d.weight.at(0, 0) - p1).abs() < 1e-15);
        sgd_step(&mut params, &scalar_grad(g2), &mut state, lr).unwrap();
        assert!((params.head_d.weight.at(0, 0) - p2).abs() < 1e-15);
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let mut params = scalar_model(3.0);
        let mut state = OptimizerState::with_defaults(&params);
        sgd_step(&mut params, &scalar_grad(10.0), &mut state, 0.0).unwrap();
        assert_eq!(params.head_d.weight.at(0, 0), 3.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut params = scalar_model(1.0);
        let other = ModelParams::zeros(2, &[], 1);
        let mut state = OptimizerState::with_defaults(&params);
        assert!(sgd_step(&mut params, &other, &mut state, 0.1).is_err());
    }

    #[test]
    fn schedule_endpoints() {
        let s = LrSchedule {
            base_lr: 0.03,
            total_steps: 1000,
        };
        assert_eq!(lr_at(&s, 0).unwrap(), 0.03);
        let end = lr_at(&s, 1000).unwrap();
        assert!((end - 0.03 * (7.0 * PI / 16.0).cos()).abs() < 1e-15);
        assert!((end / 0.03 - 0.19509032201612825).abs() < 1e-12);
        let mid = lr_at(&s, 500).unwrap();
        assert!((mid - 0.03 * (7.0 * PI / 32.0).cos()).abs() < 1e-15);
    }

    #[test]
    fn schedule_is_positive_and_non_increasing() {
        let s = LrSchedule {
            base_lr: 0.03,
            total_steps: 997,
        };
        let mut last = f64::INFINITY;
        for step in 0..=s.total_steps {
            let lr = lr_at(&s, step).unwrap();
            assert!(lr > 0.0);
            assert!(lr <= last);
            last = lr;
        }
        assert!(lr_at(&s, 998).is_err());
    }
}
