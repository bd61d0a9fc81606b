//! Shared-trunk MLP with two linear heads and manual reverse-mode
//! differentiation.
//!
//! The trunk is a stack of affine layers with ReLU activations (possibly
//! empty, in which case the heads act directly on the input). The default
//! head and the auxiliary head are plain linear maps producing one logit
//! per class each.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;

/// An affine layer: `z = x W + b` with `W` of shape `(in, out)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            weight: Matrix::zeros(in_dim, out_dim),
            bias: vec![0.0; out_dim],
        }
    }

    /// Symmetric uniform init with limit `sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut layer = DenseLayer::zeros(in_dim, out_dim);
        for w in layer.weight.data_mut() {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    fn same_shape(&self, other: &DenseLayer) -> bool {
        self.in_dim() == other.in_dim() && self.out_dim() == other.out_dim()
    }

    fn apply(&self, input: &Matrix) -> Result<Matrix> {
        let mut z = input.matmul(&self.weight)?;
        z.add_row_bias(&self.bias)?;
        Ok(z)
    }
}

/// Parameters of the two-headed model. Gradients and momentum buffers
/// reuse this struct since they mirror its shapes exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub trunk: Vec<DenseLayer>,
    pub head_d: DenseLayer,
    pub head_a: DenseLayer,
}

impl ModelParams {
    /// Seeded random init for a trunk of the given hidden widths.
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        n_classes: usize,
        rng: &mut R,
    ) -> Self {
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut width = input_dim;
        for &h in hidden {
            trunk.push(DenseLayer::glorot(width, h, rng));
            width = h;
        }
        ModelParams {
            trunk,
            head_d: DenseLayer::glorot(width, n_classes, rng),
            head_a: DenseLayer::glorot(width, n_classes, rng),
        }
    }

    pub fn zeros(input_dim: usize, hidden: &[usize], n_classes: usize) -> Self {
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut width = input_dim;
        for &h in hidden {
            trunk.push(DenseLayer::zeros(width, h));
            width = h;
        }
        ModelParams {
            trunk,
            head_d: DenseLayer::zeros(width, n_classes),
            head_a: DenseLayer::zeros(width, n_classes),
        }
    }

    /// A same-shaped parameter set of all zeros (gradient/buffer holder).
    pub fn zeros_like(&self) -> Self {
        ModelParams {
            trunk: self
                .trunk
                .iter()
                .map(|l| DenseLayer::zeros(l.in_dim(), l.out_dim()))
                .collect(),
            head_d: DenseLayer::zeros(self.head_d.in_dim(), self.head_d.out_dim()),
            head_a: DenseLayer::zeros(self.head_a.in_dim(), self.head_a.out_dim()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.trunk
            .first()
            .map_or(self.head_d.in_dim(), DenseLayer::in_dim)
    }

    pub fn n_classes(&self) -> usize {
        self.head_d.out_dim()
    }

    /// Checks the trunk chain and the head wiring.
    pub fn validate(&self) -> Result<()> {
        let mut width = self.input_dim();
        for (i, layer) in self.trunk.iter().enumerate() {
            if layer.in_dim() != width {
                return Err(Error::Config(format!(
                    "trunk layer {i} expects input width {}, got {width}",
                    layer.in_dim()
                )));
            }
            width = layer.out_dim();
        }
        if self.head_d.in_dim() != width || self.head_a.in_dim() != width {
            return Err(Error::Config(format!(
                "heads expect input widths {}/{}, trunk produces {width}",
                self.head_d.in_dim(),
                self.head_a.in_dim()
            )));
        }
        if self.head_d.out_dim() != self.head_a.out_dim() {
            return Err(Error::Config(format!(
                "heads disagree on class count: {} vs {}",
                self.head_d.out_dim(),
                self.head_a.out_dim()
            )));
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.trunk.len() == other.trunk.len()
            && self
                .trunk
                .iter()
                .zip(&other.trunk)
                .all(|(a, b)| a.same_shape(b))
            && self.head_d.same_shape(&other.head_d)
            && self.head_a.same_shape(&other.head_a)
    }

    pub fn layers(&self) -> Vec<&DenseLayer> {
        let mut v: Vec<&DenseLayer> = self.trunk.iter().collect();
        v.push(&self.head_d);
        v.push(&self.head_a);
        v
    }

    pub fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        let mut v: Vec<&mut DenseLayer> = self.trunk.iter_mut().collect();
        v.push(&mut self.head_d);
        v.push(&mut self.head_a);
        v
    }

    pub fn param_count(&self) -> usize {
        self.layers()
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    /// Reads the parameter at a flat index (layer order: trunk weights then
    /// bias, head_d, head_a).
    pub fn param(&self, mut index: usize) -> f64 {
        for layer in self.layers() {
            let w = layer.weight.data().len();
            if index < w {
                return layer.weight.data()[index];
            }
            index -= w;
            if index < layer.bias.len() {
                return layer.bias[index];
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut index: usize, value: f64) {
        for layer in self.layers_mut() {
            let w = layer.weight.data().len();
            if index < w {
                layer.weight.data_mut()[index] = value;
                return;
            }
            index -= w;
            if index < layer.bias.len() {
                layer.bias[index] = value;
                return;
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|v| v.is_finite()))
    }
}

/// Activation record from [`forward_two_head`], consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    /// Pre-activation of each trunk layer (for the ReLU mask).
    preacts: Vec<Matrix>,
    /// Post-ReLU output of each trunk layer.
    activations: Vec<Matrix>,
}

impl ForwardCache {
    fn head_input(&self) -> &Matrix {
        self.activations.last().unwrap_or(&self.input)
    }

    pub fn batch_rows(&self) -> usize {
        self.input.rows()
    }
}

fn relu(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Runs the trunk and both heads on a batch (one sample per row).
pub fn forward_two_head(
    params: &ModelParams,
    batch: &Matrix,
) -> Result<(Matrix, Matrix, ForwardCache)> {
    params.validate()?;
    if batch.cols() != params.input_dim() {
        return Err(Error::Config(format!(
            "batch width {} does not match model input width {}",
            batch.cols(),
            params.input_dim()
        )));
    }
    let mut preacts = Vec::with_capacity(params.trunk.len());
    let mut activations = Vec::with_capacity(params.trunk.len());
    let mut current = batch;
    for layer in &params.trunk {
        let z = layer.apply(current)?;
        let a = relu(&z);
        preacts.push(z);
        activations.push(a);
        current = activations.last().unwrap();
    }
    let logits_d = params.head_d.apply(current)?;
    let logits_a = params.head_a.apply(current)?;
    if !logits_d.is_finite() || !logits_a.is_finite() {
        return Err(Error::Numerical("non-finite logits in forward pass".into()));
    }
    Ok((
        logits_d,
        logits_a,
        ForwardCache {
            input: batch.clone(),
            preacts,
            activations,
        },
    ))
}

/// Reverse-mode pass: given `dL/dlogits` for both heads, returns `dL/dθ`
/// with the trunk gradient summing both heads' contributions.
pub fn backward(
    params: &ModelParams,
    cache: &ForwardCache,
    grad_logits_d: &Matrix,
    grad_logits_a: &Matrix,
) -> Result<ModelParams> {
    let n = params.n_classes();
    let rows = cache.batch_rows();
    if cache.input.cols() != params.input_dim()
        || cache.preacts.len() != params.trunk.len()
        || cache
            .preacts
            .iter()
            .zip(&params.trunk)
            .any(|(z, l)| z.cols() != l.out_dim())
    {
        return Err(Error::Usage(
            "stale or mismatched forward cache for this model".into(),
        ));
    }
    for (name, g) in [("head_d", grad_logits_d), ("head_a", grad_logits_a)] {
        if g.rows() != rows || g.cols() != n {
            return Err(Error::Usage(format!(
                "{name} logit gradient shape ({}, {}) does not match batch ({rows}, {n})",
                g.rows(),
                g.cols()
            )));
        }
    }

    let mut grads = params.zeros_like();
    let head_in = cache.head_input();

    grads.head_d.weight = head_in.transpose_matmul(grad_logits_d)?;
    grads.head_d.bias = grad_logits_d.column_sums();
    grads.head_a.weight = head_in.transpose_matmul(grad_logits_a)?;
    grads.head_a.bias = grad_logits_a.column_sums();

    // Trunk receives the sum of both heads' input-gradients.
    let mut upstream = grad_logits_d.matmul_transpose(&params.head_d.weight)?;
    let from_a = grad_logits_a.matmul_transpose(&params.head_a.weight)?;
    for (u, &a) in upstream.data_mut().iter_mut().zip(from_a.data()) {
        *u += a;
    }

    for i in (0..params.trunk.len()).rev() {
        // Mask by the ReLU derivative: 1 where the pre-activation was > 0.
        let mut dz = upstream;
        for (g, &z) in dz.data_mut().iter_mut().zip(cache.preacts[i].data()) {
            if z <= 0.0 {
                *g = 0.0;
            }
        }
        let layer_input = if i == 0 {
            &cache.input
        } else {
            &cache.activations[i - 1]
        };
        grads.trunk[i].weight = layer_input.transpose_matmul(&dz)?;
        grads.trunk[i].bias = dz.column_sums();
        upstream = dz.matmul_transpose(&params.trunk[i].weight)?;
    }

    Ok(grads)
}
