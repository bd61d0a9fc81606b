//! The epoch loop: batch cycling, per-epoch evaluation and metric
//! collection, and bit-exact checkpoint/resume.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::{AlignmentState, DistributionTracker};
use crate::datasets::{
    materialize, split_counts, DatasetSpec, MaterializedData, SyntheticSource,
    DEFAULT_TEST_PER_CLASS,
};
use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::numerics::mlp::{forward_two_head, ModelParams};
use crate::numerics::optim::{lr_at, LrSchedule, OptimizerState};
use crate::probvec::{softmax, ProbVec};

use super::config::{Method, TrainConfig};
use super::eval::{evaluate, EvalReport};
use super::metrics::{EpochRecord, RunMetrics};
use super::step::{fixmatch_da_step, fixmatch_step, rda_step, StepOutput, StepRngs};

/// Jensen gaps more negative than this indicate a real bug rather than
/// floating-point jitter.
const JENSEN_SLACK: f64 = 1e-9;

/// Synthetic-source geometry; everything not fixed by the dataset spec.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceParams {
    pub dim: usize,
    pub spread: f64,
    pub test_per_class: usize,
}

impl Default for SourceParams {
    fn default() -> Self {
        SourceParams {
            dim: 2,
            spread: 1.0,
            test_per_class: DEFAULT_TEST_PER_CLASS,
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub source: SourceParams,
    pub train: TrainConfig,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.train.validate()?;
        if self.dataset.n != self.train.n {
            return Err(Error::Config(format!(
                "dataset has {} classes but the trainer expects {}",
                self.dataset.n, self.train.n
            )));
        }
        Ok(())
    }

    pub fn build_source(&self) -> Result<SyntheticSource> {
        let mut source = SyntheticSource::ring(
            self.dataset.n,
            self.source.dim,
            self.source.spread,
            self.train.seed,
        )?;
        source.test_per_class = self.source.test_per_class;
        Ok(source)
    }
}

/// Replacement-free epoch shuffling with recycling: when the pool runs
/// out mid-batch it is reshuffled and drawing continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchCycler {
    order: Vec<usize>,
    pos: usize,
}

impl BatchCycler {
    fn new(len: usize) -> Self {
        BatchCycler {
            order: (0..len).collect(),
            pos: len, // force a shuffle on the first draw
        }
    }

    fn next_batch(&mut self, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        assert!(!self.order.is_empty(), "cannot draw from an empty pool");
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            if self.pos >= self.order.len() {
                self.order.shuffle(rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Method-specific alignment state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MethodAlign {
    Rda(AlignmentState),
    PriorDa(DistributionTracker),
    None,
}

/// Serializable snapshot of a trainer mid-run; reloading resumes the
/// exact trajectory (datasets are regenerated from the spec and seed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub spec: RunSpec,
    pub model: ModelParams,
    pub opt: OptimizerState,
    pub align: MethodAlign,
    pub step: usize,
    pub rng_shuffle: ChaCha8Rng,
    pub rng_augment: ChaCha8Rng,
    pub rng_complement: ChaCha8Rng,
    pub labeled_cycler: BatchCycler,
    pub unlabeled_cycler: BatchCycler,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

// RNG stream ids per concern, all derived from the run seed. Methods
// that skip a concern leave its stream untouched, keeping the shared
// streams comparable across methods under one seed.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_AUGMENT: u64 = 2;
const STREAM_COMPLEMENT: u64 = 3;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Owns one training run: model, optimizer, alignment state, data and
/// RNG streams. Nothing is shared; independent runs are freely parallel.
pub struct Trainer {
    spec: RunSpec,
    data: MaterializedData,
    model: ModelParams,
    opt: OptimizerState,
    align: MethodAlign,
    schedule: LrSchedule,
    step: usize,
    rng_shuffle: ChaCha8Rng,
    rng_augment: ChaCha8Rng,
    rng_complement: ChaCha8Rng,
    labeled_cycler: BatchCycler,
    unlabeled_cycler: BatchCycler,
    /// Empirical labeled-class marginal, the prior for traditional DA.
    prior: ProbVec,
    true_unlabeled_marginal: ProbVec,
}

impl Trainer {
    pub fn new(spec: RunSpec) -> Result<Self> {
        spec.validate()?;
        if spec.train.n < 5 {
            eprintln!(
                "warning: entropy guarantee of the reverse operation needs n >= 5; n = {}",
                spec.train.n
            );
        }
        let source = spec.build_source()?;
        let split = split_counts(&spec.dataset)?;
        let data = materialize(&source, &split, spec.train.seed)?;
        if data.labeled.is_empty() {
            return Err(Error::Config("protocol produced no labeled data".into()));
        }
        if data.unlabeled.is_empty() {
            return Err(Error::Config("protocol produced no unlabeled data".into()));
        }

        let mut rng_init = stream_rng(spec.train.seed, STREAM_INIT);
        let model = ModelParams::init(
            spec.source.dim,
            &spec.train.hidden,
            spec.train.n,
            &mut rng_init,
        );
        let opt = OptimizerState::new(
            &model,
            spec.train.momentum,
            spec.train.weight_decay,
            spec.train.base_lr,
        );
        let align = match spec.train.method {
            Method::Rda => MethodAlign::Rda(AlignmentState::with_capacity(
                spec.train.n,
                spec.train.tracker_window,
            )),
            Method::Fixmatch => MethodAlign::None,
            Method::FixmatchDa => MethodAlign::PriorDa(DistributionTracker::with_capacity(
                spec.train.n,
                spec.train.tracker_window,
            )),
        };
        let schedule = LrSchedule {
            base_lr: spec.train.base_lr,
            total_steps: spec.train.total_steps().max(1),
        };

        let prior = ProbVec::normalize(
            &split
                .labeled_per_class
                .iter()
                .map(|&c| c as f64)
                .collect::<Vec<_>>(),
        )?;
        let true_unlabeled_marginal = ProbVec::normalize(
            &split
                .unlabeled_per_class
                .iter()
                .map(|&c| c as f64)
                .collect::<Vec<_>>(),
        )?;

        let labeled_cycler = BatchCycler::new(data.labeled.len());
        let unlabeled_cycler = BatchCycler::new(data.unlabeled.len());

        Ok(Trainer {
            spec: spec.clone(),
            data,
            model,
            opt,
            align,
            schedule,
            step: 0,
            rng_shuffle: stream_rng(spec.train.seed, STREAM_SHUFFLE),
            rng_augment: stream_rng(spec.train.seed, STREAM_AUGMENT),
            rng_complement: stream_rng(spec.train.seed, STREAM_COMPLEMENT),
            labeled_cycler,
            unlabeled_cycler,
            prior,
            true_unlabeled_marginal,
        })
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn spec(&self) -> &RunSpec {
        &self.spec
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn align(&self) -> &MethodAlign {
        &self.align
    }

    pub fn true_unlabeled_marginal(&self) -> &ProbVec {
        &self.true_unlabeled_marginal
    }

    /// Runs a single optimization step with the configured method.
    pub fn step_once(&mut self) -> Result<StepOutput> {
        // Beyond the configured horizon the schedule holds its final value.
        let lr = lr_at(&self.schedule, self.step.min(self.schedule.total_steps))?;
        let config = self.spec.train.clone();
        let labeled_idx = self
            .labeled_cycler
            .next_batch(config.b, &mut self.rng_shuffle);
        let unlabeled_idx = self
            .unlabeled_cycler
            .next_batch(config.unlabeled_batch(), &mut self.rng_shuffle);
        let labeled: Vec<_> = labeled_idx
            .iter()
            .map(|&i| self.data.labeled[i].clone())
            .collect();
        let unlabeled: Vec<_> = unlabeled_idx
            .iter()
            .map(|&i| self.data.unlabeled[i].clone())
            .collect();

        let mut rngs = StepRngs {
            augment: &mut self.rng_augment,
            complement: &mut self.rng_complement,
        };
        let out = match (&mut self.align, config.method) {
            (MethodAlign::Rda(align), Method::Rda) => rda_step(
                &mut self.model,
                &mut self.opt,
                align,
                &labeled,
                &unlabeled,
                &config,
                lr,
                &mut rngs,
            )?,
            (MethodAlign::None, Method::Fixmatch) => fixmatch_step(
                &mut self.model,
                &mut self.opt,
                &labeled,
                &unlabeled,
                &config,
                lr,
                &mut rngs,
            )?,
            (MethodAlign::PriorDa(tracker), Method::FixmatchDa) => fixmatch_da_step(
                &mut self.model,
                &mut self.opt,
                tracker,
                &self.prior,
                &labeled,
                &unlabeled,
                &config,
                lr,
                &mut rngs,
            )?,
            _ => {
                return Err(Error::Config(
                    "alignment state does not match the configured method".into(),
                ))
            }
        };
        self.step += 1;
        debug_assert!(
            (out.loss_total
                - (out.loss_sd
                    + config.lambda_a * out.loss_sa
                    + config.lambda_cd * out.loss_cd
                    + config.lambda_ca * out.loss_ca))
                .abs()
                < 1e-9
        );
        Ok(out)
    }

    pub fn evaluate(&self) -> Result<EvalReport> {
        evaluate(&self.model, &self.data.test)
    }

    /// Entropy of the mean prediction and mean per-sample entropy on the
    /// raw (un-augmented) unlabeled features.
    pub fn unlabeled_entropy_stats(&self) -> Result<(f64, f64)> {
        let batch = Matrix::from_rows(
            &self
                .data
                .unlabeled
                .iter()
                .map(|e| e.features.clone())
                .collect::<Vec<_>>(),
        )?;
        let (logits_d, _, _) = forward_two_head(&self.model, &batch)?;
        let n = self.spec.train.n;
        let mut mean_pred = vec![0.0; n];
        let mut entropy_sum = 0.0;
        let rows = logits_d.rows();
        for r in 0..rows {
            let p = softmax(logits_d.row(r))?;
            entropy_sum += p.entropy();
            for (m, &v) in mean_pred.iter_mut().zip(p.values()) {
                *m += v;
            }
        }
        let mean_pred = ProbVec::normalize(&mean_pred)?;
        Ok((mean_pred.entropy(), entropy_sum / rows as f64))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            spec: self.spec.clone(),
            model: self.model.clone(),
            opt: self.opt.clone(),
            align: self.align.clone(),
            step: self.step,
            rng_shuffle: self.rng_shuffle.clone(),
            rng_augment: self.rng_augment.clone(),
            rng_complement: self.rng_complement.clone(),
            labeled_cycler: self.labeled_cycler.clone(),
            unlabeled_cycler: self.unlabeled_cycler.clone(),
        }
    }

    /// Rebuilds a trainer from a checkpoint; the datasets are regenerated
    /// from the spec and seed, everything else is restored verbatim.
    pub fn resume(checkpoint: Checkpoint) -> Result<Self> {
        let Checkpoint {
            spec,
            model,
            opt,
            align,
            step,
            rng_shuffle,
            rng_augment,
            rng_complement,
            labeled_cycler,
            unlabeled_cycler,
        } = checkpoint;
        let mut trainer = Trainer::new(spec)?;
        trainer.model = model;
        trainer.opt = opt;
        trainer.align = align;
        trainer.step = step;
        trainer.rng_shuffle = rng_shuffle;
        trainer.rng_augment = rng_augment;
        trainer.rng_complement = rng_complement;
        trainer.labeled_cycler = labeled_cycler;
        trainer.unlabeled_cycler = unlabeled_cycler;
        Ok(trainer)
    }
}

/// Result of [`train`]. A step failure mid-run is reported through
/// `aborted` with the metrics collected so far preserved; only
/// construction and validation failures surface as errors.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: RunMetrics,
    pub model: ModelParams,
    pub aborted: Option<String>,
}

struct EpochAccum {
    sums: [f64; 5],
    pseudo_counts: Vec<f64>,
    mask_sum: f64,
    min_mask: f64,
    steps: usize,
}

impl EpochAccum {
    fn new(n: usize) -> Self {
        EpochAccum {
            sums: [0.0; 5],
            pseudo_counts: vec![0.0; n],
            mask_sum: 0.0,
            min_mask: f64::INFINITY,
            steps: 0,
        }
    }

    fn push(&mut self, out: &StepOutput, unlabeled_batch: usize) {
        self.sums[0] += out.loss_total;
        self.sums[1] += out.loss_sd;
        self.sums[2] += out.loss_sa;
        self.sums[3] += out.loss_cd;
        self.sums[4] += out.loss_ca;
        // Recover pooled one-hot counts from the per-step marginal.
        let contributing = out.mask_rate * unlabeled_batch as f64;
        for (c, &m) in self
            .pseudo_counts
            .iter_mut()
            .zip(out.batch_pseudo_marginal.values())
        {
            *c += m * contributing;
        }
        self.mask_sum += out.mask_rate;
        self.min_mask = self.min_mask.min(out.mask_rate);
        self.steps += 1;
    }

    fn marginal(&self, n: usize) -> ProbVec {
        if self.pseudo_counts.iter().sum::<f64>() <= 0.0 {
            ProbVec::uniform(n)
        } else {
            ProbVec::normalize(&self.pseudo_counts).expect("counts are non-negative")
        }
    }
}

fn epoch_record(
    trainer: &Trainer,
    epoch: usize,
    accum: Option<&EpochAccum>,
) -> Result<(EpochRecord, EvalReport)> {
    let n = trainer.spec.train.n;
    let eval = trainer.evaluate()?;
    let (h_expected, h_mean) = trainer.unlabeled_entropy_stats()?;
    let raw_gap = h_expected - h_mean;
    if raw_gap < -JENSEN_SLACK {
        return Err(Error::Numerical(format!(
            "Jensen gap {raw_gap} negative beyond floating-point slack"
        )));
    }
    let mutual_info_proxy = raw_gap.max(0.0);

    let (losses, marginal, mask_rate, min_mask) = match accum {
        Some(a) => {
            let k = a.steps.max(1) as f64;
            (
                [
                    a.sums[0] / k,
                    a.sums[1] / k,
                    a.sums[2] / k,
                    a.sums[3] / k,
                    a.sums[4] / k,
                ],
                a.marginal(n),
                a.mask_sum / k,
                a.min_mask,
            )
        }
        None => ([0.0; 5], ProbVec::uniform(n), 1.0, 1.0),
    };
    let marginal_tv = marginal.total_variation(&trainer.true_unlabeled_marginal)?;

    Ok((
        EpochRecord {
            epoch,
            accuracy: eval.accuracy,
            loss_total: losses[0],
            loss_sd: losses[1],
            loss_sa: losses[2],
            loss_cd: losses[3],
            loss_ca: losses[4],
            pseudo_label_marginal: marginal,
            marginal_tv,
            expected_pred_entropy: h_expected,
            mean_pred_entropy: h_mean,
            mutual_info_proxy,
            mask_rate,
            min_step_mask_rate: min_mask,
        },
        eval,
    ))
}

/// Runs the full epoch loop for a spec: per-epoch evaluation is appended
/// to the metrics, and `epochs = 0` yields the initial evaluation only.
/// Deterministic in the seed. On a failed step the metrics collected so
/// far are preserved inside the error path by the caller re-running with
/// a checkpoint; the partial records accumulated here are dropped only if
/// construction itself fails.
pub fn train(spec: &RunSpec) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(spec.clone())?;
    let n = spec.train.n;
    let mut records = Vec::with_capacity(spec.train.epochs + 1);
    let (initial, mut last_eval) = epoch_record(&trainer, 0, None)?;
    records.push(initial);

    let mut aborted = None;
    'epochs: for epoch in 1..=spec.train.epochs {
        let mut accum = EpochAccum::new(n);
        for _ in 0..spec.train.steps_per_epoch {
            match trainer.step_once() {
                Ok(out) => accum.push(&out, spec.train.unlabeled_batch()),
                Err(e) => {
                    aborted = Some(format!("step failed in epoch {epoch}: {e}"));
                    break 'epochs;
                }
            }
        }
        let (record, eval) = epoch_record(&trainer, epoch, Some(&accum))?;
        records.push(record);
        last_eval = eval;
    }

    let metrics = RunMetrics {
        n,
        records,
        final_confidences: last_eval.confidences,
        final_per_class_accuracy: last_eval.per_class_accuracy,
        true_unlabeled_marginal: trainer.true_unlabeled_marginal.clone(),
    };
    metrics.validate()?;
    Ok(TrainOutcome {
        metrics,
        model: trainer.model,
        aborted,
    })
}
