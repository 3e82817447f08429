//! Training loops for DRF and the concat baseline, evaluation, checkpoints
//! and disruption sweeps.
//!
//! A single run is sequential in its steps because queue contents depend on
//! order; within a step the per-sample work is data-parallel.

mod checkpoint;
mod metrics;
mod optim;
pub mod sweep;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, ModelKind};
pub use metrics::EvalReport;
pub use optim::{cosine_lr, AdamW, AdamWConfig};

use std::cell::RefCell;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{Gradients, ParamSet, Tape};
use crate::error::{Error, Result};
use crate::losses::{total_loss, LossBreakdown, Objective, SampleOutput};
use crate::model::{argmax, BaselineModel, DrfModel, ModelConfig, Weighting, ENCODER_PREFIXES};
use crate::par;
use crate::queuedist::{EnqueueGate, QueuePair};
use crate::synthdata::{apply_disruption, DisruptionSpec, Modality, Phase, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub queue_capacity: usize,
    /// Both queues must hold this many entries before distribution terms
    /// and quality weights switch on.
    pub n_min: usize,
    /// Admission rule once a queue holds `n_min` entries.
    pub enqueue_gate: EnqueueGate,
    pub lr_encoders: f64,
    pub lr_rest: f64,
    pub lr_floor: f64,
    pub weight_decay: f64,
    /// Initialisation and shuffling seed.
    pub seed: u64,
    pub model: ModelConfig,
    pub objective: Objective,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            queue_capacity: 512,
            n_min: 64,
            enqueue_gate: EnqueueGate::Mean,
            lr_encoders: 2e-5,
            lr_rest: 2e-4,
            lr_floor: 1e-6,
            weight_decay: 0.01,
            seed: 0,
            model: ModelConfig::default(),
            objective: Objective::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::Config {
                key: key.into(),
                reason: reason.into(),
            })
        };
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        if self.queue_capacity == 0 {
            return bad("queue_capacity", "must be at least 1");
        }
        if self.n_min == 0 || self.n_min > self.queue_capacity {
            return bad("n_min", "must lie in 1..=queue_capacity");
        }
        for (key, v) in [
            ("lr_encoders", self.lr_encoders),
            ("lr_rest", self.lr_rest),
            ("lr_floor", self.lr_floor),
            ("weight_decay", self.weight_decay),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(key, "must be finite and nonnegative");
            }
        }
        self.model.validate()
    }

    pub fn echo(&self) -> Vec<(String, String)> {
        let o = &self.objective;
        let mut out: Vec<(String, String)> = vec![
            ("epochs".into(), self.epochs.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("queue_capacity".into(), self.queue_capacity.to_string()),
            ("n_min".into(), self.n_min.to_string()),
            ("enqueue_gate".into(), self.enqueue_gate.as_str().into()),
            ("lr_encoders".into(), self.lr_encoders.to_string()),
            ("lr_rest".into(), self.lr_rest.to_string()),
            ("lr_floor".into(), self.lr_floor.to_string()),
            ("weight_decay".into(), self.weight_decay.to_string()),
            ("train_seed".into(), self.seed.to_string()),
            ("loss_distribution_constraint".into(), o.flags.distribution_constraint.to_string()),
            ("loss_sample_recovery".into(), o.flags.sample_recovery.to_string()),
            ("loss_distribution_recovery".into(), o.flags.distribution_recovery.to_string()),
            ("loss_classification".into(), o.flags.classification.to_string()),
            ("weight_distribution_constraint".into(), o.weights.distribution_constraint.to_string()),
            ("weight_sample_recovery".into(), o.weights.sample_recovery.to_string()),
            ("weight_distribution_recovery".into(), o.weights.distribution_recovery.to_string()),
            ("weight_classification".into(), o.weights.classification.to_string()),
            ("gaussian_weighting".into(), o.fusion.gaussian_weighting.to_string()),
            ("pair_expansion".into(), o.fusion.pair_expansion.to_string()),
            ("normalize_weights".into(), o.fusion.normalize_weights.to_string()),
        ];
        out.extend(self.model.echo());
        out
    }

    fn steps_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }

    fn lr_groups(&self, params: &ParamSet) -> Vec<f64> {
        params
            .ids()
            .map(|id| {
                let name = params.name(id);
                if ENCODER_PREFIXES.iter().any(|p| name.starts_with(&format!("{p}."))) {
                    self.lr_encoders
                } else {
                    self.lr_rest
                }
            })
            .collect()
    }
}

/// Per-epoch means of the loss components, with the rate at the epoch's
/// last step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    /// Optimizer steps taken so far.
    pub step: usize,
    pub lr: f64,
    pub loss: LossBreakdown,
    /// Whether both queues had reached `n_min` by the end of the epoch.
    pub warmed: bool,
}

impl LogRow {
    pub const CSV_HEADER: &'static str =
        "epoch,step,lr,l_dis,l_rec_sample_v2t,l_rec_sample_t2v,l_rec_dist_v2t,l_rec_dist_t2v,l_cls,total,warmed";

    pub fn to_csv(&self) -> String {
        let b = &self.loss;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.step,
            self.lr,
            b.l_dis,
            b.l_rec_sample_v2t,
            b.l_rec_sample_t2v,
            b.l_rec_dist_v2t,
            b.l_rec_dist_t2v,
            b.l_cls,
            b.total,
            self.warmed
        )
    }
}

/// Training log as CSV with `# key=value` header lines.
pub fn log_to_csv(rows: &[LogRow], echo: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in echo {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(LogRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

/// A trained DRF model with its frozen feature queues.
#[derive(Debug, Clone, PartialEq)]
pub struct DrfState {
    pub model: DrfModel,
    pub queues: QueuePair,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineState {
    pub model: BaselineModel,
    pub config: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct TrainOutput<S> {
    pub state: S,
    pub log: Vec<LogRow>,
}

/// Shuffled index batches for every epoch, drawn from the training seed.
fn epoch_orders(n: usize, cfg: &TrainConfig) -> impl Iterator<Item = Vec<usize>> + '_ {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7261_696e);
    (0..cfg.epochs).map(move |_| {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        order
    })
}

fn diverged(epoch: usize, step: usize, log: &[LogRow]) -> Error {
    Error::Diverged {
        epoch,
        step,
        last_finite: log.last().map(LogRow::to_csv),
    }
}

/// Shared optimisation loop over the parameter table `params_of(model)`.
/// `batch_loss` evaluates a batch; `after_step` runs once the update is
/// applied and reports whether the queues are warmed.
fn optimise<M, P, F, G>(model: &mut M, params_of: P, n: usize, cfg: &TrainConfig, mut batch_loss: F, mut after_step: G) -> Result<Vec<LogRow>>
where
    P: Fn(&mut M) -> &mut ParamSet,
    F: FnMut(&M, &[usize]) -> Result<(LossBreakdown, Gradients)>,
    G: FnMut() -> Result<bool>,
{
    let per_epoch = cfg.steps_per_epoch(n);
    let total_steps = cfg.epochs * per_epoch;
    let base = cfg.lr_groups(params_of(model));
    let mut opt = AdamW::new(
        params_of(model),
        AdamWConfig {
            weight_decay: cfg.weight_decay,
            ..AdamWConfig::default()
        },
    );
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for (epoch, order) in epoch_orders(n, cfg).enumerate() {
        let mut sum = LossBreakdown::default();
        let mut lr_rest = cfg.lr_rest;
        let mut warmed = false;
        for idx in order.chunks(cfg.batch_size) {
            let (loss, grads) = batch_loss(model, idx)?;
            if !loss.is_finite() {
                return Err(diverged(epoch, step, &log));
            }
            let lr: Vec<f64> = base.iter().map(|&b| cosine_lr(b, cfg.lr_floor, step, total_steps)).collect();
            lr_rest = cosine_lr(cfg.lr_rest, cfg.lr_floor, step, total_steps);
            let params = params_of(model);
            opt.step(params, &grads, &lr);
            if !params.all_finite() {
                return Err(diverged(epoch, step, &log));
            }
            warmed = after_step()?;
            sum.add_scaled(&loss, 1.0 / per_epoch as f64);
            step += 1;
        }
        log.push(LogRow {
            epoch,
            step,
            lr: lr_rest,
            loss: sum,
            warmed,
        });
    }
    Ok(log)
}

/// Trains DRF. A random-strategy disruption is applied to the training set
/// first; a fixed-strategy one leaves training data untouched.
pub fn train(train_set: &[Sample], disruption: &DisruptionSpec, cfg: &TrainConfig) -> Result<TrainOutput<DrfState>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Constraint("empty training set".into()));
    }
    let data = apply_disruption(train_set, disruption, Phase::Train)?;
    let mut model = DrfModel::init(&cfg.model, cfg.seed)?;
    let queues = RefCell::new(QueuePair::new(cfg.queue_capacity, cfg.model.feature_dim)?);
    // Forward-pass features of the latest batch, enqueued after the step.
    let pending: RefCell<Vec<SampleOutput>> = RefCell::default();
    let log = optimise(
        &mut model,
        |m| &mut m.params,
        data.len(),
        cfg,
        |m, idx| {
            let batch: Vec<Sample> = idx.iter().map(|&i| data[i].clone()).collect();
            let q = queues.borrow();
            let stats = if q.warmed(cfg.n_min) { Some(q.stats()?) } else { None };
            let out = total_loss(m, &batch, &q, &stats, &cfg.objective)?;
            *pending.borrow_mut() = out.samples;
            Ok((out.breakdown, out.grads))
        },
        || {
            let mut q = queues.borrow_mut();
            for s in pending.borrow_mut().drain(..) {
                if let Some(f) = s.f_v {
                    q.offer(Modality::Image, &f, cfg.n_min, cfg.enqueue_gate)?;
                }
                if let Some(f) = s.f_t {
                    q.offer(Modality::Text, &f, cfg.n_min, cfg.enqueue_gate)?;
                }
            }
            Ok(q.warmed(cfg.n_min))
        },
    )?;
    Ok(TrainOutput {
        state: DrfState {
            model,
            queues: queues.into_inner(),
            config: cfg.clone(),
        },
        log,
    })
}

/// Trains the concat baseline with cross-entropy only.
pub fn train_baseline(
    train_set: &[Sample],
    disruption: &DisruptionSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutput<BaselineState>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Constraint("empty training set".into()));
    }
    let data = apply_disruption(train_set, disruption, Phase::Train)?;
    let mut model = BaselineModel::init(&cfg.model, cfg.seed)?;
    let log = optimise(
        &mut model,
        |m| &mut m.params,
        data.len(),
        cfg,
        |m, idx| {
            let p = &m.params;
            let scale = 1.0 / idx.len() as f64;
            let per_sample = par::map(idx, |&i| -> Result<(f64, Gradients)> {
                let mut tape = Tape::new(p);
                let logits = m.logits(&mut tape, &data[i])?;
                let (ce, _) = tape.softmax_cross_entropy(logits, data[i].label)?;
                let root = tape.scale_const(ce, scale);
                Ok((tape.scalar(ce), tape.backward(root)?))
            });
            let mut grads = Gradients::empty(p.len());
            let mut loss = LossBreakdown::default();
            for item in per_sample {
                let (ce, g) = item?;
                grads.add_assign(&g);
                loss.l_cls += scale * ce;
            }
            loss.total = loss.l_cls;
            Ok((loss, grads))
        },
        || Ok(false),
    )?;
    Ok(TrainOutput {
        state: BaselineState {
            model,
            config: cfg.clone(),
        },
        log,
    })
}

/// Class probabilities of every sample; queues are read, never written.
pub fn predict(state: &DrfState, samples: &[Sample]) -> Result<Vec<Vec<f64>>> {
    let stats = if state.queues.warmed(state.config.n_min) {
        Some(state.queues.stats()?)
    } else {
        None
    };
    let weighting = match &stats {
        Some((image, text)) => Weighting::Quality { image, text },
        None => Weighting::Uniform,
    };
    par::map(samples, |s| {
        state
            .model
            .forward(s, weighting, state.config.objective.fusion)
            .map(|r| r.probs)
    })
    .into_iter()
    .collect()
}

pub fn predict_baseline(state: &BaselineState, samples: &[Sample]) -> Result<Vec<Vec<f64>>> {
    par::map(samples, |s| state.model.predict_proba(s)).into_iter().collect()
}

fn report(samples: &[Sample], probs: &[Vec<f64>], num_classes: usize, spec: &DisruptionSpec) -> Result<EvalReport> {
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let predicted: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
    let mut r = EvalReport::from_predictions(&labels, &predicted, num_classes)?;
    r.echo = spec.echo();
    Ok(r)
}

/// Applies the inference-phase disruption to `samples` and scores DRF.
pub fn evaluate(state: &DrfState, samples: &[Sample], disruption: &DisruptionSpec) -> Result<EvalReport> {
    let data = apply_disruption(samples, disruption, Phase::Inference)?;
    let probs = predict(state, &data)?;
    report(&data, &probs, state.model.config.num_classes, disruption)
}

pub fn evaluate_baseline(state: &BaselineState, samples: &[Sample], disruption: &DisruptionSpec) -> Result<EvalReport> {
    let data = apply_disruption(samples, disruption, Phase::Inference)?;
    let probs = predict_baseline(state, &data)?;
    report(&data, &probs, state.model.config.num_classes, disruption)
}
