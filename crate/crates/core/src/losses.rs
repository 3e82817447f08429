//! Training objectives: the distribution constraint, sample- and
//! distribution-based recovery, classification, and their joint sum.
//!
//! Per-sample terms are averaged over the batch. The two distribution-based
//! recovery terms are batch-level quantities computed once per step over the
//! full queues and added unaveraged.

use serde::{Deserialize, Serialize};

use crate::diffcore::{Gradients, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::model::{Direction, DrfModel, FusedVars, FusionOptions, Mlp, Weighting};
use crate::par;
use crate::queuedist::{DistributionStats, FeatureQueue, QueuePair};
use crate::synthdata::Sample;

/// Which loss components take part in the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossFlags {
    pub distribution_constraint: bool,
    pub sample_recovery: bool,
    pub distribution_recovery: bool,
    pub classification: bool,
}

impl Default for LossFlags {
    fn default() -> Self {
        Self {
            distribution_constraint: true,
            sample_recovery: true,
            distribution_recovery: true,
            classification: true,
        }
    }
}

/// Multipliers of the loss components; the plain sum uses all ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub distribution_constraint: f64,
    pub sample_recovery: f64,
    pub distribution_recovery: f64,
    pub classification: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            distribution_constraint: 1.0,
            sample_recovery: 1.0,
            distribution_recovery: 1.0,
            classification: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Objective {
    pub flags: LossFlags,
    pub weights: LossWeights,
    pub fusion: FusionOptions,
}

/// Component values of the joint objective for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_dis: f64,
    pub l_rec_sample_v2t: f64,
    pub l_rec_sample_t2v: f64,
    pub l_rec_dist_v2t: f64,
    pub l_rec_dist_t2v: f64,
    pub l_cls: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [
            self.l_dis,
            self.l_rec_sample_v2t,
            self.l_rec_sample_t2v,
            self.l_rec_dist_v2t,
            self.l_rec_dist_t2v,
            self.l_cls,
            self.total,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    pub fn components(&self) -> [f64; 6] {
        [
            self.l_dis,
            self.l_rec_sample_v2t,
            self.l_rec_sample_t2v,
            self.l_rec_dist_v2t,
            self.l_rec_dist_t2v,
            self.l_cls,
        ]
    }

    pub(crate) fn add_scaled(&mut self, other: &LossBreakdown, k: f64) {
        self.l_dis += k * other.l_dis;
        self.l_rec_sample_v2t += k * other.l_rec_sample_v2t;
        self.l_rec_sample_t2v += k * other.l_rec_sample_t2v;
        self.l_rec_dist_v2t += k * other.l_rec_dist_v2t;
        self.l_rec_dist_t2v += k * other.l_rec_dist_t2v;
        self.l_cls += k * other.l_cls;
        self.total += k * other.total;
    }
}

/// `λ_v·exp(‖f_v−μ_v‖ − ‖f_v−μ_t‖) + λ_t·exp(‖f_t−μ_t‖ − ‖f_t−μ_v‖)`.
///
/// Absent features contribute nothing; the means are constants.
pub fn distribution_constraint(
    tape: &mut Tape<'_>,
    f_v: Option<Var>,
    f_t: Option<Var>,
    mu_v: &[f64],
    mu_t: &[f64],
) -> Result<Var> {
    let mut terms = Vec::with_capacity(2);
    for (f, own, other) in [(f_v, mu_v, mu_t), (f_t, mu_t, mu_v)] {
        let Some(f) = f else { continue };
        let own = tape.constant_vec(own.to_vec());
        let other = tape.constant_vec(other.to_vec());
        let d_own = tape.sub(f, own)?;
        let d_own = tape.l2norm(d_own);
        let d_other = tape.sub(f, other)?;
        let d_other = tape.l2norm(d_other);
        let gap = tape.sub(d_own, d_other)?;
        terms.push(tape.exp(gap));
    }
    if terms.is_empty() {
        return Ok(tape.constant_scalar(0.0));
    }
    tape.sum(&terms)
}

/// `‖converted − target‖₂` when both sides exist, else 0. The target is
/// detached so no gradient reaches its encoder.
pub fn sample_recovery(tape: &mut Tape<'_>, converted: Option<Var>, target: Option<Var>) -> Result<Var> {
    match (converted, target) {
        (Some(c), Some(t)) => {
            let t = tape.detach(t);
            let diff = tape.sub(c, t)?;
            Ok(tape.l2norm(diff))
        }
        _ => Ok(tape.constant_scalar(0.0)),
    }
}

/// Mean and spread nodes of a converted queue.
#[derive(Debug, Clone, Copy)]
pub struct StatsVars {
    pub mean: Var,
    pub std: Var,
}

/// Statistics of `converter` applied to every queue entry; entries are
/// constants, gradients reach the converter only.
pub fn converted_stats(tape: &mut Tape<'_>, queue: &FeatureQueue, converter: &Mlp) -> Result<StatsVars> {
    if queue.is_empty() {
        return Err(Error::EmptyQueue);
    }
    let rows: Vec<Vec<f64>> = queue.entries().map(<[f64]>::to_vec).collect();
    let x = tape.constant(Tensor::matrix(&rows)?);
    let y = converter.forward_rows(tape, x)?;
    let mean = tape.row_mean(y)?;
    let var = tape.row_sq_dev_mean(y, mean)?;
    let std = tape.sqrt(var);
    Ok(StatsVars { mean, std })
}

/// Plain-value form of [`converted_stats`].
pub fn converted_stats_value(model: &DrfModel, queue: &FeatureQueue, dir: Direction) -> Result<DistributionStats> {
    let mut tape = Tape::new(&model.params);
    let sv = converted_stats(&mut tape, queue, model.converter(dir))?;
    Ok(DistributionStats {
        mean: tape.data(sv.mean).to_vec(),
        std: tape.scalar(sv.std),
        count: queue.len(),
    })
}

/// `‖μ_conv − μ_target‖₂ + |σ_conv − σ_target|` with constant target.
pub fn distribution_recovery(tape: &mut Tape<'_>, converted: StatsVars, target: &DistributionStats) -> Result<Var> {
    let mu = tape.constant_vec(target.mean.clone());
    let sigma = tape.constant_scalar(target.std);
    let dm = tape.sub(converted.mean, mu)?;
    let dm = tape.l2norm(dm);
    let ds = tape.sub(converted.std, sigma)?;
    let ds = tape.abs(ds);
    tape.add(dm, ds)
}

/// Tape handles of one sample's loss terms.
#[derive(Debug, Clone)]
pub struct SampleTerms {
    pub fused: FusedVars,
    pub dis: Option<Var>,
    pub rec_v2t: Var,
    pub rec_t2v: Var,
    pub cls: Var,
    pub probs: Vec<f64>,
}

/// Queue statistics for a step, `None` while the queues warm up.
pub type StepStats = Option<(DistributionStats, DistributionStats)>;

/// Records one sample's forward pass and per-sample loss terms.
pub fn sample_terms(
    tape: &mut Tape<'_>,
    model: &DrfModel,
    sample: &Sample,
    stats: &StepStats,
    fusion: FusionOptions,
) -> Result<SampleTerms> {
    let (f_v, f_t) = model.encode(tape, sample)?;
    let weighting = match stats {
        Some((image, text)) => Weighting::Quality { image, text },
        None => Weighting::Uniform,
    };
    let fused = model.expand_and_fuse(tape, f_v, f_t, weighting, fusion)?;
    let dis = match stats {
        Some((image, text)) => Some(distribution_constraint(tape, f_v, f_t, &image.mean, &text.mean)?),
        None => None,
    };
    let rec_v2t = sample_recovery(tape, fused.rec_t, f_t)?;
    let rec_t2v = sample_recovery(tape, fused.rec_v, f_v)?;
    let (cls, probs) = tape.softmax_cross_entropy(fused.logits, sample.label)?;
    Ok(SampleTerms {
        fused,
        dis,
        rec_v2t,
        rec_t2v,
        cls,
        probs,
    })
}

/// Weighted sum of the enabled per-sample terms, scaled by `scale`.
fn sample_objective(tape: &mut Tape<'_>, t: &SampleTerms, obj: &Objective, scale: f64) -> Result<Option<Var>> {
    let (f, w) = (obj.flags, obj.weights);
    let mut parts = Vec::new();
    if f.distribution_constraint {
        if let Some(d) = t.dis {
            parts.push(tape.scale_const(d, w.distribution_constraint * scale));
        }
    }
    if f.sample_recovery {
        parts.push(tape.scale_const(t.rec_v2t, w.sample_recovery * scale));
        parts.push(tape.scale_const(t.rec_t2v, w.sample_recovery * scale));
    }
    if f.classification {
        parts.push(tape.scale_const(t.cls, w.classification * scale));
    }
    if parts.is_empty() {
        return Ok(None);
    }
    tape.sum(&parts).map(Some)
}

fn sample_breakdown(tape: &Tape<'_>, t: &SampleTerms, obj: &Objective) -> LossBreakdown {
    let (f, w) = (obj.flags, obj.weights);
    let mut b = LossBreakdown::default();
    if f.distribution_constraint {
        b.l_dis = t.dis.map_or(0.0, |d| tape.scalar(d));
    }
    if f.sample_recovery {
        b.l_rec_sample_v2t = tape.scalar(t.rec_v2t);
        b.l_rec_sample_t2v = tape.scalar(t.rec_t2v);
    }
    if f.classification {
        b.l_cls = tape.scalar(t.cls);
    }
    b.total = w.distribution_constraint * b.l_dis
        + w.sample_recovery * (b.l_rec_sample_v2t + b.l_rec_sample_t2v)
        + w.classification * b.l_cls;
    b
}

/// Tape handles of the two distribution-based recovery terms.
#[derive(Debug, Clone, Copy)]
pub struct DistributionTerms {
    pub v2t: Var,
    pub t2v: Var,
}

/// Converter statistics over the full opposite-modality queues, compared
/// against the target queue statistics.
pub fn distribution_terms(
    tape: &mut Tape<'_>,
    model: &DrfModel,
    queues: &QueuePair,
    stats: &(DistributionStats, DistributionStats),
) -> Result<DistributionTerms> {
    let (image, text) = stats;
    let conv_t = converted_stats(tape, &queues.image, &model.converter_v2t)?;
    let v2t = distribution_recovery(tape, conv_t, text)?;
    let conv_v = converted_stats(tape, &queues.text, &model.converter_t2v)?;
    let t2v = distribution_recovery(tape, conv_v, image)?;
    Ok(DistributionTerms { v2t, t2v })
}

/// What a training step needs to know about each sample after the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutput {
    pub f_v: Option<Vec<f64>>,
    pub f_t: Option<Vec<f64>>,
    pub probs: Vec<f64>,
}

/// Breakdown, parameter gradients and per-sample outputs of one batch.
#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub breakdown: LossBreakdown,
    pub grads: Gradients,
    pub samples: Vec<SampleOutput>,
}

/// Evaluates the joint objective on a batch and its gradient.
///
/// `stats` carries the queue statistics of the step; `None` selects the
/// warm-up objective (no distribution terms, uniform fusion weights). Each
/// sample is recorded on its own tape (in parallel when enabled) and the
/// gradients are reduced in index order, so results do not depend on the
/// scheduling.
pub fn total_loss(
    model: &DrfModel,
    batch: &[Sample],
    queues: &QueuePair,
    stats: &StepStats,
    obj: &Objective,
) -> Result<BatchLoss> {
    if batch.is_empty() {
        return Err(Error::Constraint("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let per_sample = par::map(batch, |s| -> Result<(LossBreakdown, Option<Gradients>, SampleOutput)> {
        let mut tape = Tape::new(&model.params);
        let terms = sample_terms(&mut tape, model, s, stats, obj.fusion)?;
        let root = sample_objective(&mut tape, &terms, obj, scale)?;
        let grads = root.map(|r| tape.backward(r)).transpose()?;
        let out = SampleOutput {
            f_v: terms.fused.f_v.map(|v| tape.data(v).to_vec()),
            f_t: terms.fused.f_t.map(|v| tape.data(v).to_vec()),
            probs: terms.probs.clone(),
        };
        Ok((sample_breakdown(&tape, &terms, obj), grads, out))
    });

    let mut breakdown = LossBreakdown::default();
    let mut grads = Gradients::empty(model.params.len());
    let mut samples = Vec::with_capacity(batch.len());
    for item in per_sample {
        let (b, g, out) = item?;
        breakdown.add_scaled(&b, scale);
        if let Some(g) = g {
            grads.add_assign(&g);
        }
        samples.push(out);
    }

    if obj.flags.distribution_recovery {
        if let Some(st) = stats {
            let mut tape = Tape::new(&model.params);
            let dt = distribution_terms(&mut tape, model, queues, st)?;
            let both = tape.add(dt.v2t, dt.t2v)?;
            let root = tape.scale_const(both, obj.weights.distribution_recovery);
            grads.add_assign(&tape.backward(root)?);
            breakdown.l_rec_dist_v2t = tape.scalar(dt.v2t);
            breakdown.l_rec_dist_t2v = tape.scalar(dt.t2v);
            breakdown.total += obj.weights.distribution_recovery * (breakdown.l_rec_dist_v2t + breakdown.l_rec_dist_t2v);
        }
    }
    Ok(BatchLoss {
        breakdown,
        grads,
        samples,
    })
}

/// Records the whole batch objective on a single tape and returns the
/// scalar root. Same arithmetic as [`total_loss`]; used for gradient checks.
pub fn total_loss_on_tape(
    tape: &mut Tape<'_>,
    model: &DrfModel,
    batch: &[Sample],
    queues: &QueuePair,
    stats: &StepStats,
    obj: &Objective,
) -> Result<Var> {
    let scale = 1.0 / batch.len() as f64;
    let mut parts = Vec::new();
    for s in batch {
        let terms = sample_terms(tape, model, s, stats, obj.fusion)?;
        if let Some(r) = sample_objective(tape, &terms, obj, scale)? {
            parts.push(r);
        }
    }
    if obj.flags.distribution_recovery {
        if let Some(st) = stats {
            let dt = distribution_terms(tape, model, queues, st)?;
            let both = tape.add(dt.v2t, dt.t2v)?;
            parts.push(tape.scale_const(both, obj.weights.distribution_recovery));
        }
    }
    if parts.is_empty() {
        return Ok(tape.constant_scalar(0.0));
    }
    tape.sum(&parts)
}
