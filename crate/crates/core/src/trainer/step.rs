//! Single optimization steps: the reciprocal-alignment method and the
//! two confidence-threshold baselines.
//!
//! All three share one loss object ([`StepLoss`]) holding the augmented
//! batches and *detached* targets: gradients flow through the supervised
//! logits and the strong-augmentation logits only, never through the
//! pseudo-label or complementary-label targets.

use rand_chacha::ChaCha8Rng;

use crate::alignment::{prior_align, reciprocal_align_p, reciprocal_align_q, AlignmentState, DistributionTracker};
use crate::datasets::{AugmentMode, Augmenter, LabeledExample, UnlabeledExample};
use crate::error::{Error, Result};
use crate::numerics::gradcheck::DifferentiableLoss;
use crate::numerics::matrix::Matrix;
use crate::numerics::mlp::{backward, forward_two_head, ModelParams};
use crate::numerics::optim::{sgd_step, OptimizerState};
use crate::probvec::{
    cross_entropy_hard, cross_entropy_soft, sample_complementary, softmax, HardLabel, ProbVec,
};

use super::config::TrainConfig;

/// Per-step RNG streams. Keeping augmentation and complementary-label
/// sampling on separate streams makes method trajectories comparable
/// under identical seeds.
pub struct StepRngs<'a> {
    pub augment: &'a mut ChaCha8Rng,
    pub complement: &'a mut ChaCha8Rng,
}

/// Outcome of one optimization step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub loss_total: f64,
    pub loss_sd: f64,
    pub loss_sa: f64,
    pub loss_cd: f64,
    pub loss_ca: f64,
    /// Marginal of the pseudo-labels that contributed to the consistency
    /// loss this step; uniform when nothing survived the mask.
    pub batch_pseudo_marginal: ProbVec,
    /// Fraction of the unlabeled batch that contributed (always 1 for RDA).
    pub mask_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossComponents {
    pub sd: f64,
    pub sa: f64,
    pub cd: f64,
    pub ca: f64,
}

/// One step's loss with frozen targets.
///
/// Holds the weakly-augmented labeled batch, the strongly-augmented
/// unlabeled batch, and the targets for each; evaluating it at any
/// parameter point recomputes the forward passes but never the targets.
#[derive(Debug, Clone)]
pub struct StepLoss {
    pub labeled_weak: Matrix,
    pub labels: Vec<HardLabel>,
    /// Complementary labels for the auxiliary head; `None` for baselines
    /// that leave the auxiliary head untrained.
    pub complements: Option<Vec<HardLabel>>,
    pub strong: Matrix,
    /// Hard pseudo-label target per strong row; `None` rows are masked out
    /// but still divide into the `1/(mu B)` average.
    pub hard_targets: Vec<Option<HardLabel>>,
    /// Soft complementary targets for the auxiliary head on strong rows.
    pub soft_targets: Option<Vec<ProbVec>>,
    pub lambda_a: f64,
    pub lambda_cd: f64,
    pub lambda_ca: f64,
    pub n: usize,
}

impl StepLoss {
    fn batch(&self) -> usize {
        self.labels.len()
    }

    fn unlabeled_batch(&self) -> usize {
        self.hard_targets.len()
    }

    pub fn total(&self, c: &LossComponents) -> f64 {
        c.sd + self.lambda_a * c.sa + self.lambda_cd * c.cd + self.lambda_ca * c.ca
    }

    /// Forward-only evaluation of the four loss terms.
    pub fn components(&self, params: &ModelParams) -> Result<LossComponents> {
        let (lab_d, lab_a, _) = forward_two_head(params, &self.labeled_weak)?;
        let (str_d, str_a, _) = forward_two_head(params, &self.strong)?;
        self.components_from_logits(&lab_d, &lab_a, &str_d, &str_a)
    }

    fn components_from_logits(
        &self,
        lab_d: &Matrix,
        lab_a: &Matrix,
        str_d: &Matrix,
        str_a: &Matrix,
    ) -> Result<LossComponents> {
        let b = self.batch() as f64;
        let mu_b = self.unlabeled_batch() as f64;

        let mut sd = 0.0;
        for (row, &label) in self.labels.iter().enumerate() {
            sd += cross_entropy_hard(label, &softmax(lab_d.row(row))?);
        }
        sd /= b;

        let mut sa = 0.0;
        if let Some(complements) = &self.complements {
            for (row, &comp) in complements.iter().enumerate() {
                sa += cross_entropy_hard(comp, &softmax(lab_a.row(row))?);
            }
            sa /= b;
        }

        let mut cd = 0.0;
        for (row, target) in self.hard_targets.iter().enumerate() {
            if let Some(t) = target {
                cd += cross_entropy_hard(*t, &softmax(str_d.row(row))?);
            }
        }
        cd /= mu_b;

        let mut ca = 0.0;
        if let Some(soft) = &self.soft_targets {
            for (row, target) in soft.iter().enumerate() {
                ca += cross_entropy_soft(target, &softmax(str_a.row(row))?);
            }
            ca /= mu_b;
        }

        Ok(LossComponents { sd, sa, cd, ca })
    }

    /// Full pass: loss terms plus the analytic gradient of the weighted
    /// total with respect to the parameters.
    pub fn components_and_grad(
        &self,
        params: &ModelParams,
    ) -> Result<(LossComponents, ModelParams)> {
        let b = self.batch();
        let mu_b = self.unlabeled_batch();
        if self.labeled_weak.rows() != b || self.strong.rows() != mu_b {
            return Err(Error::Usage("step loss batch shapes disagree".into()));
        }

        let (lab_d, lab_a, lab_cache) = forward_two_head(params, &self.labeled_weak)?;
        let (str_d, str_a, str_cache) = forward_two_head(params, &self.strong)?;
        let components = self.components_from_logits(&lab_d, &lab_a, &str_d, &str_a)?;

        // dL/dz for -ln softmax(z)[t] is softmax(z) - onehot(t); every
        // term carries its lambda weight and batch normalizer here.
        let inv_b = 1.0 / b as f64;
        let inv_mu_b = 1.0 / mu_b as f64;

        let mut g_lab_d = Matrix::zeros(b, self.n);
        for (row, &label) in self.labels.iter().enumerate() {
            let p = softmax(lab_d.row(row))?;
            for (c, g) in g_lab_d.data_mut()[row * self.n..(row + 1) * self.n]
                .iter_mut()
                .enumerate()
            {
                let indicator = f64::from(c == label.index());
                *g = (p.values()[c] - indicator) * inv_b;
            }
        }

        let mut g_lab_a = Matrix::zeros(b, self.n);
        if let Some(complements) = &self.complements {
            for (row, &comp) in complements.iter().enumerate() {
                let p = softmax(lab_a.row(row))?;
                for (c, g) in g_lab_a.data_mut()[row * self.n..(row + 1) * self.n]
                    .iter_mut()
                    .enumerate()
                {
                    let indicator = f64::from(c == comp.index());
                    *g = self.lambda_a * (p.values()[c] - indicator) * inv_b;
                }
            }
        }

        let mut g_str_d = Matrix::zeros(mu_b, self.n);
        for (row, target) in self.hard_targets.iter().enumerate() {
            if let Some(t) = target {
                let p = softmax(str_d.row(row))?;
                for (c, g) in g_str_d.data_mut()[row * self.n..(row + 1) * self.n]
                    .iter_mut()
                    .enumerate()
                {
                    let indicator = f64::from(c == t.index());
                    *g = self.lambda_cd * (p.values()[c] - indicator) * inv_mu_b;
                }
            }
        }

        let mut g_str_a = Matrix::zeros(mu_b, self.n);
        if let Some(soft) = &self.soft_targets {
            for (row, target) in soft.iter().enumerate() {
                let p = softmax(str_a.row(row))?;
                for (c, g) in g_str_a.data_mut()[row * self.n..(row + 1) * self.n]
                    .iter_mut()
                    .enumerate()
                {
                    *g = self.lambda_ca * (p.values()[c] - target.values()[c]) * inv_mu_b;
                }
            }
        }

        let mut grads = backward(params, &lab_cache, &g_lab_d, &g_lab_a)?;
        let strong_grads = backward(params, &str_cache, &g_str_d, &g_str_a)?;
        for (g, s) in grads.layers_mut().into_iter().zip(strong_grads.layers()) {
            for (a, &b) in g.weight.data_mut().iter_mut().zip(s.weight.data()) {
                *a += b;
            }
            for (a, &b) in g.bias.iter_mut().zip(&s.bias) {
                *a += b;
            }
        }
        Ok((components, grads))
    }
}

impl DifferentiableLoss for StepLoss {
    fn loss(&self, params: &ModelParams) -> Result<f64> {
        Ok(self.total(&self.components(params)?))
    }

    fn grad(&self, params: &ModelParams) -> Result<ModelParams> {
        Ok(self.components_and_grad(params)?.1)
    }
}

fn check_batch_sizes(
    labeled: &[LabeledExample],
    unlabeled: &[UnlabeledExample],
    config: &TrainConfig,
) -> Result<()> {
    if labeled.len() != config.b {
        return Err(Error::Usage(format!(
            "labeled batch of {} but config.b = {}",
            labeled.len(),
            config.b
        )));
    }
    if unlabeled.len() != config.unlabeled_batch() {
        return Err(Error::Usage(format!(
            "unlabeled batch of {} but mu*b = {}",
            unlabeled.len(),
            config.unlabeled_batch()
        )));
    }
    Ok(())
}

/// Applies augmentation in the canonical order shared by every method:
/// labeled weak rows, then unlabeled weak rows, then unlabeled strong rows.
fn augment_batches(
    labeled: &[LabeledExample],
    unlabeled: &[UnlabeledExample],
    augmenter: &Augmenter,
    rng: &mut ChaCha8Rng,
) -> Result<(Matrix, Matrix, Matrix)> {
    let labeled_weak = Matrix::from_rows(
        &labeled
            .iter()
            .map(|e| augmenter.apply(&e.features, AugmentMode::Weak, rng))
            .collect::<Vec<_>>(),
    )?;
    let unlabeled_weak = Matrix::from_rows(
        &unlabeled
            .iter()
            .map(|e| augmenter.apply(&e.features, AugmentMode::Weak, rng))
            .collect::<Vec<_>>(),
    )?;
    let unlabeled_strong = Matrix::from_rows(
        &unlabeled
            .iter()
            .map(|e| augmenter.apply(&e.features, AugmentMode::Strong, rng))
            .collect::<Vec<_>>(),
    )?;
    Ok((labeled_weak, unlabeled_weak, unlabeled_strong))
}

/// Softmax of every row of a logit matrix.
fn row_distributions(logits: &Matrix) -> Result<Vec<ProbVec>> {
    (0..logits.rows()).map(|r| softmax(logits.row(r))).collect()
}

fn pooled_marginal(targets: &[Option<HardLabel>], n: usize) -> (ProbVec, f64) {
    let mut counts = vec![0.0; n];
    let mut kept = 0usize;
    for t in targets.iter().flatten() {
        counts[t.index()] += 1.0;
        kept += 1;
    }
    let marginal = if kept == 0 {
        ProbVec::uniform(n)
    } else {
        ProbVec::normalize(&counts).expect("pseudo-label counts are non-negative")
    };
    (marginal, kept as f64 / targets.len() as f64)
}

fn finite_or_abort(c: &LossComponents, total: f64) -> Result<()> {
    if [c.sd, c.sa, c.cd, c.ca, total].iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite loss: sd={} sa={} cd={} ca={} total={total}",
            c.sd, c.sa, c.cd, c.ca
        )));
    }
    Ok(())
}

/// One reciprocal-distribution-alignment step.
///
/// Complementary labels are resampled for every labeled example. Both
/// heads predict the weakly-augmented unlabeled batch; the predictions
/// are reversed and reciprocally aligned against the trackers, and the
/// aligned targets drive the consistency losses on the strong batch. All
/// unlabeled samples participate; there is no confidence mask.
#[allow(clippy::too_many_arguments)]
pub fn rda_step(
    model: &mut ModelParams,
    opt: &mut OptimizerState,
    align: &mut AlignmentState,
    labeled: &[LabeledExample],
    unlabeled: &[UnlabeledExample],
    config: &TrainConfig,
    lr: f64,
    rngs: &mut StepRngs,
) -> Result<StepOutput> {
    check_batch_sizes(labeled, unlabeled, config)?;
    let n = config.n;

    let complements = labeled
        .iter()
        .map(|e| sample_complementary(e.label, n, rngs.complement))
        .collect::<Result<Vec<_>>>()?;

    let (labeled_weak, unlabeled_weak, strong) =
        augment_batches(labeled, unlabeled, &config.augment, rngs.augment)?;

    // Weak-augmentation predictions are targets only; no gradient flows
    // through this forward pass.
    let (logits_p, logits_q, _) = forward_two_head(model, &unlabeled_weak)?;
    let p_batch = row_distributions(&logits_p)?;
    let q_batch = row_distributions(&logits_q)?;

    let mut hard_targets = Vec::with_capacity(p_batch.len());
    let mut soft_targets = Vec::with_capacity(q_batch.len());
    for (p, q) in p_batch.iter().zip(&q_batch) {
        let aligned_p = reciprocal_align_p(p, align)?;
        let aligned_q = reciprocal_align_q(q, align)?;
        hard_targets.push(Some(aligned_p.argmax_label()));
        soft_targets.push(aligned_q);
    }

    let loss = StepLoss {
        labeled_weak,
        labels: labeled.iter().map(|e| e.label).collect(),
        complements: Some(complements),
        strong,
        hard_targets,
        soft_targets: Some(soft_targets),
        lambda_a: config.lambda_a,
        lambda_cd: config.lambda_cd,
        lambda_ca: config.lambda_ca,
        n,
    };

    let (components, grads) = loss.components_and_grad(model)?;
    let total = loss.total(&components);
    finite_or_abort(&components, total)?;

    align.record_batch(&p_batch, &q_batch)?;
    sgd_step(model, &grads, opt, lr)?;

    let (marginal, mask_rate) = pooled_marginal(&loss.hard_targets, n);
    debug_assert_eq!(mask_rate, 1.0);
    Ok(StepOutput {
        loss_total: total,
        loss_sd: components.sd,
        loss_sa: components.sa,
        loss_cd: components.cd,
        loss_ca: components.ca,
        batch_pseudo_marginal: marginal,
        mask_rate,
    })
}

/// One FixMatch-style baseline step: confidence-thresholded hard
/// pseudo-labels on the default head only.
pub fn fixmatch_step(
    model: &mut ModelParams,
    opt: &mut OptimizerState,
    labeled: &[LabeledExample],
    unlabeled: &[UnlabeledExample],
    config: &TrainConfig,
    lr: f64,
    rngs: &mut StepRngs,
) -> Result<StepOutput> {
    fixmatch_like_step(model, opt, None, labeled, unlabeled, config, lr, rngs)
}

/// FixMatch with traditional distribution alignment: predictions are
/// rescaled toward the labeled-class prior before thresholding.
#[allow(clippy::too_many_arguments)]
pub fn fixmatch_da_step(
    model: &mut ModelParams,
    opt: &mut OptimizerState,
    tracker_p: &mut DistributionTracker,
    prior: &ProbVec,
    labeled: &[LabeledExample],
    unlabeled: &[UnlabeledExample],
    config: &TrainConfig,
    lr: f64,
    rngs: &mut StepRngs,
) -> Result<StepOutput> {
    fixmatch_like_step(
        model,
        opt,
        Some((tracker_p, prior)),
        labeled,
        unlabeled,
        config,
        lr,
        rngs,
    )
}

#[allow(clippy::too_many_arguments)]
fn fixmatch_like_step(
    model: &mut ModelParams,
    opt: &mut OptimizerState,
    da: Option<(&mut DistributionTracker, &ProbVec)>,
    labeled: &[LabeledExample],
    unlabeled: &[UnlabeledExample],
    config: &TrainConfig,
    lr: f64,
    rngs: &mut StepRngs,
) -> Result<StepOutput> {
    check_batch_sizes(labeled, unlabeled, config)?;
    let n = config.n;

    let (labeled_weak, unlabeled_weak, strong) =
        augment_batches(labeled, unlabeled, &config.augment, rngs.augment)?;

    let (logits_p, _, _) = forward_two_head(model, &unlabeled_weak)?;
    let p_batch = row_distributions(&logits_p)?;

    let hard_targets: Vec<Option<HardLabel>> = match &da {
        None => p_batch
            .iter()
            .map(|p| {
                let max = p.values()[p.argmax_label().index()];
                (max >= config.tau).then(|| p.argmax_label())
            })
            .collect(),
        Some((tracker, prior)) => p_batch
            .iter()
            .map(|p| {
                let aligned = prior_align(p, prior, tracker)?;
                let max = aligned.values()[aligned.argmax_label().index()];
                Ok((max >= config.tau).then(|| aligned.argmax_label()))
            })
            .collect::<Result<_>>()?,
    };

    let loss = StepLoss {
        labeled_weak,
        labels: labeled.iter().map(|e| e.label).collect(),
        complements: None,
        strong,
        hard_targets,
        soft_targets: None,
        lambda_a: config.lambda_a,
        lambda_cd: config.lambda_cd,
        lambda_ca: config.lambda_ca,
        n,
    };

    let (components, grads) = loss.components_and_grad(model)?;
    let total = loss.total(&components);
    finite_or_abort(&components, total)?;

    if let Some((tracker, _)) = da {
        // The running marginal tracks the raw predictions, not the
        // aligned ones.
        tracker.update(&p_batch)?;
    }
    sgd_step(model, &grads, opt, lr)?;

    let (marginal, mask_rate) = pooled_marginal(&loss.hard_targets, n);
    Ok(StepOutput {
        loss_total: total,
        loss_sd: components.sd,
        loss_sa: components.sa,
        loss_cd: components.cd,
        loss_ca: components.ca,
        batch_pseudo_marginal: marginal,
        mask_rate,
    })
}

/// Builds a random small net plus a frozen full RDA step loss, for
/// gradient checking against central differences.
pub fn gradcheck_fixture(seed: u64, n: usize) -> Result<(ModelParams, StepLoss)> {
    use rand::SeedableRng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 2;
    let b = 4;
    let model = ModelParams::init(dim, &[8, 8], n, &mut rng);

    let random_rows = |rows: usize, rng: &mut ChaCha8Rng| -> Result<Matrix> {
        use rand::Rng;
        Matrix::from_rows(
            &(0..rows)
                .map(|_| (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect())
                .collect::<Vec<Vec<f64>>>(),
        )
    };

    let labeled_weak = random_rows(b, &mut rng)?;
    let strong = random_rows(b, &mut rng)?;
    let unlabeled_weak = random_rows(b, &mut rng)?;

    let labels = (0..b)
        .map(|i| HardLabel::new(i % n, n))
        .collect::<Result<Vec<_>>>()?;
    let complements = labels
        .iter()
        .map(|&y| sample_complementary(y, n, &mut rng))
        .collect::<Result<Vec<_>>>()?;

    // Warm the trackers with a couple of batches so the alignment ratios
    // are non-trivial, then freeze targets from the real pipeline.
    let mut align = AlignmentState::new(n);
    for _ in 0..3 {
        let warm = random_rows(b, &mut rng)?;
        let (lp, lq, _) = forward_two_head(&model, &warm)?;
        align.record_batch(&row_distributions(&lp)?, &row_distributions(&lq)?)?;
    }

    let (logits_p, logits_q, _) = forward_two_head(&model, &unlabeled_weak)?;
    let mut hard_targets = Vec::new();
    let mut soft_targets = Vec::new();
    for (p, q) in row_distributions(&logits_p)?
        .iter()
        .zip(&row_distributions(&logits_q)?)
    {
        hard_targets.push(Some(reciprocal_align_p(p, &align)?.argmax_label()));
        soft_targets.push(reciprocal_align_q(q, &align)?);
    }

    Ok((
        model,
        StepLoss {
            labeled_weak,
            labels,
            complements: Some(complements),
            strong,
            hard_targets,
            soft_targets: Some(soft_targets),
            lambda_a: 1.0,
            lambda_cd: 1.0,
            lambda_ca: 1.0,
            n,
        },
    ))
}
