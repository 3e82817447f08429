//! Plain-text checkpoints: a `# key=value` config header, one line per
//! named parameter, then the feature queues of a DRF model.
//!
//! Floats are written in shortest round-trip form, so a checkpoint read back
//! and written again is byte-identical.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::diffcore::{ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::losses::Objective;
use crate::model::{BaselineModel, DrfModel, ModelConfig};
use crate::queuedist::{FeatureQueue, QueuePair};
use crate::synthdata::Modality;

use super::{BaselineState, DrfState, TrainConfig};

const MAGIC: &str = "# drf-checkpoint v1";
const QUEUE_MARK: &str = "[queue]\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Drf,
    Baseline,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Drf => "drf",
            ModelKind::Baseline => "baseline",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drf" => Ok(ModelKind::Drf),
            "baseline" => Ok(ModelKind::Baseline),
            _ => Err(Error::Config {
                key: "model".into(),
                reason: format!("unknown model {s:?} (expected drf or baseline)"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoint {
    Drf(DrfState),
    Baseline(BaselineState),
}

impl Checkpoint {
    pub fn kind(&self) -> ModelKind {
        match self {
            Checkpoint::Drf(_) => ModelKind::Drf,
            Checkpoint::Baseline(_) => ModelKind::Baseline,
        }
    }

    pub fn config(&self) -> &TrainConfig {
        match self {
            Checkpoint::Drf(s) => &s.config,
            Checkpoint::Baseline(s) => &s.config,
        }
    }

    fn params(&self) -> &ParamSet {
        match self {
            Checkpoint::Drf(s) => &s.model.params,
            Checkpoint::Baseline(s) => &s.model.params,
        }
    }
}

/// Serialises a checkpoint; `extra` header pairs are written after the
/// training config and ignored on read.
pub fn write_checkpoint(ckpt: &Checkpoint, extra: &[(String, String)]) -> String {
    let mut out = format!("{MAGIC}\n# kind={}\n", ckpt.kind().as_str());
    for (k, v) in ckpt.config().echo().iter().chain(extra) {
        let _ = writeln!(out, "# {k}={v}");
    }
    for (name, t) in ckpt.params().iter() {
        let shape: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        let _ = write!(out, "param {name} {}", shape.join("x"));
        for v in t.data() {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    if let Checkpoint::Drf(s) = ckpt {
        for q in [&s.queues.image, &s.queues.text] {
            out.push_str(QUEUE_MARK);
            out.push_str(&q.to_text());
        }
    }
    out
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

fn parse_value<T: FromStr>(header: &[(usize, String, String)], key: &str) -> Result<T> {
    let (line, _, v) = header
        .iter()
        .find(|(_, k, _)| k == key)
        .ok_or_else(|| parse_err(1, format!("missing header key {key}")))?;
    v.parse()
        .map_err(|_| parse_err(*line, format!("bad value {v:?} for {key}")))
}

fn config_from_header(h: &[(usize, String, String)]) -> Result<TrainConfig> {
    let mut objective = Objective::default();
    objective.flags.distribution_constraint = parse_value(h, "loss_distribution_constraint")?;
    objective.flags.sample_recovery = parse_value(h, "loss_sample_recovery")?;
    objective.flags.distribution_recovery = parse_value(h, "loss_distribution_recovery")?;
    objective.flags.classification = parse_value(h, "loss_classification")?;
    objective.weights.distribution_constraint = parse_value(h, "weight_distribution_constraint")?;
    objective.weights.sample_recovery = parse_value(h, "weight_sample_recovery")?;
    objective.weights.distribution_recovery = parse_value(h, "weight_distribution_recovery")?;
    objective.weights.classification = parse_value(h, "weight_classification")?;
    objective.fusion.gaussian_weighting = parse_value(h, "gaussian_weighting")?;
    objective.fusion.pair_expansion = parse_value(h, "pair_expansion")?;
    objective.fusion.normalize_weights = parse_value(h, "normalize_weights")?;
    Ok(TrainConfig {
        epochs: parse_value(h, "epochs")?,
        batch_size: parse_value(h, "batch_size")?,
        queue_capacity: parse_value(h, "queue_capacity")?,
        n_min: parse_value(h, "n_min")?,
        enqueue_gate: parse_value(h, "enqueue_gate")?,
        lr_encoders: parse_value(h, "lr_encoders")?,
        lr_rest: parse_value(h, "lr_rest")?,
        lr_floor: parse_value(h, "lr_floor")?,
        weight_decay: parse_value(h, "weight_decay")?,
        seed: parse_value(h, "train_seed")?,
        model: ModelConfig {
            raw_image_dim: parse_value(h, "raw_image_dim")?,
            raw_text_dim: parse_value(h, "raw_text_dim")?,
            feature_dim: parse_value(h, "feature_dim")?,
            fused_dim: parse_value(h, "fused_dim")?,
            hidden: parse_value(h, "hidden")?,
            num_classes: parse_value(h, "num_classes")?,
        },
        objective,
    })
}

fn parse_param(line_no: usize, rest: &str, params: &mut ParamSet) -> Result<()> {
    let mut it = rest.split_whitespace();
    let name = it.next().ok_or_else(|| parse_err(line_no, "missing parameter name"))?;
    let shape = it
        .next()
        .ok_or_else(|| parse_err(line_no, "missing shape"))?
        .split('x')
        .map(|d| d.parse::<usize>().map_err(|e| parse_err(line_no, e.to_string())))
        .collect::<Result<Vec<usize>>>()?;
    let data = it
        .map(|v| v.parse::<f64>().map_err(|e| parse_err(line_no, e.to_string())))
        .collect::<Result<Vec<f64>>>()?;
    let t = Tensor::new(shape, data).map_err(|e| parse_err(line_no, e.to_string()))?;
    params
        .insert(name, t)
        .map_err(|e| parse_err(line_no, e.to_string()))?;
    Ok(())
}

/// Parses a checkpoint written by [`write_checkpoint`].
pub fn read_checkpoint(text: &str) -> Result<Checkpoint> {
    let mut sections = text.split(QUEUE_MARK);
    let body = sections.next().unwrap_or_default();
    let mut lines = body.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim_end() == MAGIC => {}
        _ => return Err(parse_err(1, "not a drf checkpoint")),
    }
    let mut header = Vec::new();
    let mut params = ParamSet::new();
    for (i, line) in lines {
        if let Some(kv) = line.strip_prefix("# ") {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| parse_err(i + 1, "header line without '='"))?;
            header.push((i + 1, k.to_string(), v.to_string()));
        } else if let Some(rest) = line.strip_prefix("param ") {
            parse_param(i + 1, rest, &mut params)?;
        } else if !line.trim().is_empty() {
            return Err(parse_err(i + 1, "unexpected line"));
        }
    }
    let kind: ModelKind = parse_value(&header, "kind")?;
    let config = config_from_header(&header)?;
    match kind {
        ModelKind::Baseline => Ok(Checkpoint::Baseline(BaselineState {
            model: BaselineModel::from_params(&config.model, params)?,
            config,
        })),
        ModelKind::Drf => {
            let image = FeatureQueue::from_text(sections.next().ok_or_else(|| parse_err(0, "missing image queue"))?)?;
            let text = FeatureQueue::from_text(sections.next().ok_or_else(|| parse_err(0, "missing text queue"))?)?;
            if image.modality() != Modality::Image || text.modality() != Modality::Text {
                return Err(parse_err(0, "queues must be image then text"));
            }
            Ok(Checkpoint::Drf(DrfState {
                model: DrfModel::from_params(&config.model, params)?,
                queues: QueuePair { image, text },
                config,
            }))
        }
    }
}
