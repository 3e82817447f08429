//! Encoders, modality converters, pair expansion with quality-weighted
//! fusion, and the classifier head. Also the concat baseline that shares
//! the encoder and fusion architecture.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{softmax, ParamId, ParamSet, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::queuedist::DistributionStats;
use crate::synthdata::Sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub raw_image_dim: usize,
    pub raw_text_dim: usize,
    /// Shared feature width of both modalities.
    pub feature_dim: usize,
    pub fused_dim: usize,
    pub hidden: usize,
    pub num_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            raw_image_dim: 32,
            raw_text_dim: 32,
            feature_dim: 16,
            fused_dim: 16,
            hidden: 32,
            num_classes: 3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.raw_image_dim,
            self.raw_text_dim,
            self.feature_dim,
            self.fused_dim,
            self.hidden,
        ];
        if dims.contains(&0) || self.num_classes < 2 {
            return Err(Error::Config {
                key: "model".into(),
                reason: "all widths must be positive and num_classes >= 2".into(),
            });
        }
        Ok(())
    }

    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("raw_image_dim".into(), self.raw_image_dim.to_string()),
            ("raw_text_dim".into(), self.raw_text_dim.to_string()),
            ("feature_dim".into(), self.feature_dim.to_string()),
            ("fused_dim".into(), self.fused_dim.to_string()),
            ("hidden".into(), self.hidden.to_string()),
            ("num_classes".into(), self.num_classes.to_string()),
        ]
    }
}

/// How branches of the expanded pair are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionOptions {
    /// Gaussian quality weights; when off every active branch gets weight 1.
    pub gaussian_weighting: bool,
    /// Three branches per sample; when off a single branch fills a missing
    /// modality with its recovered feature.
    pub pair_expansion: bool,
    /// Divide branch weights by their sum.
    pub normalize_weights: bool,
}

impl Default for FusionOptions {
    fn default() -> Self {
        Self {
            gaussian_weighting: true,
            pair_expansion: true,
            normalize_weights: false,
        }
    }
}

/// Distribution statistics the fusion weights are computed against.
#[derive(Debug, Clone, Copy)]
pub enum Weighting<'a> {
    Quality {
        image: &'a DistributionStats,
        text: &'a DistributionStats,
    },
    /// Weight 1 on every active branch (warm-up, or the weighting ablation).
    Uniform,
}

/// Stack of affine layers with relu between them (none after the last).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<(ParamId, ParamId)>,
}

impl Mlp {
    fn build(params: &mut ParamSet, prefix: &str, widths: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (i, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            let wid = params.insert(format!("{prefix}.{i}.weight"), Tensor::new(vec![fan_out, fan_in], w)?)?;
            let bid = params.insert(format!("{prefix}.{i}.bias"), Tensor::zeros(vec![fan_out]))?;
            layers.push((wid, bid));
        }
        Ok(Self { layers })
    }

    fn lookup(params: &ParamSet, prefix: &str, depth: usize) -> Result<Self> {
        let find = |name: String| {
            params.id(&name).ok_or_else(|| Error::Config {
                key: name,
                reason: "missing parameter".into(),
            })
        };
        let layers = (0..depth)
            .map(|i| Ok((find(format!("{prefix}.{i}.weight"))?, find(format!("{prefix}.{i}.bias"))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[(ParamId, ParamId)] {
        &self.layers
    }

    /// Applies the stack to a vector node.
    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        self.run(tape, x, false)
    }

    /// Applies the stack independently to every row of a matrix node.
    pub fn forward_rows(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        self.run(tape, x, true)
    }

    fn run(&self, tape: &mut Tape<'_>, mut h: Var, rows: bool) -> Result<Var> {
        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let (wv, bv) = (tape.param(w), tape.param(b));
            h = if rows {
                tape.affine_rows(h, wv, bv)?
            } else {
                tape.affine(h, wv, bv)?
            };
            if i < last {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Image feature to text feature space.
    #[serde(rename = "v2t")]
    ImageToText,
    #[serde(rename = "t2v")]
    TextToImage,
}

/// Tape handles for one fused sample.
#[derive(Debug, Clone)]
pub struct FusedVars {
    pub f_v: Option<Var>,
    pub f_t: Option<Var>,
    /// `C_{v→t}(f_v)`, present when the image is.
    pub rec_t: Option<Var>,
    /// `C_{t→v}(f_t)`, present when the text is.
    pub rec_v: Option<Var>,
    /// Weights of the (image, text), (image, recovered text) and
    /// (recovered image, text) branches; `None` when the branch is gated off.
    pub weights: [Option<Var>; 3],
    pub contributions: [Option<Var>; 3],
    pub fused: Var,
    pub logits: Var,
}

/// Plain values of a fused forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedResult {
    /// Zero vector when the modality is absent.
    pub f_v: Vec<f64>,
    pub f_t: Vec<f64>,
    pub rec_v: Vec<f64>,
    pub rec_t: Vec<f64>,
    /// `[w_full, w_img, w_txt]`; exactly 0 for gated-off branches.
    pub weights: [f64; 3],
    /// Per-branch weighted fusion outputs; exact zero vectors when gated off.
    pub contributions: [Vec<f64>; 3],
    pub fused: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl FusedResult {
    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

/// DRF network: two encoders, two converters, shared fusion MLP, classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct DrfModel {
    pub config: ModelConfig,
    pub params: ParamSet,
    pub image_encoder: Mlp,
    pub text_encoder: Mlp,
    pub converter_v2t: Mlp,
    pub converter_t2v: Mlp,
    pub fusion: Mlp,
    pub classifier: Mlp,
}

pub(crate) const ENCODER_PREFIXES: [&str; 2] = ["image_encoder", "text_encoder"];

impl DrfModel {
    /// Fan-in scaled uniform weights and zero biases from `seed`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let c = config;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let image_encoder = Mlp::build(&mut params, "image_encoder", &[c.raw_image_dim, c.hidden, c.feature_dim], &mut rng)?;
        let text_encoder = Mlp::build(&mut params, "text_encoder", &[c.raw_text_dim, c.hidden, c.feature_dim], &mut rng)?;
        let converter_v2t = Mlp::build(&mut params, "converter_v2t", &[c.feature_dim, c.hidden, c.feature_dim], &mut rng)?;
        let converter_t2v = Mlp::build(&mut params, "converter_t2v", &[c.feature_dim, c.hidden, c.feature_dim], &mut rng)?;
        let fusion = Mlp::build(&mut params, "fusion", &[2 * c.feature_dim, c.hidden, c.hidden, c.fused_dim], &mut rng)?;
        let classifier = Mlp::build(&mut params, "classifier", &[c.fused_dim, c.num_classes], &mut rng)?;
        Ok(Self {
            config: config.clone(),
            params,
            image_encoder,
            text_encoder,
            converter_v2t,
            converter_t2v,
            fusion,
            classifier,
        })
    }

    /// Rebinds a loaded parameter table to the network layout.
    pub fn from_params(config: &ModelConfig, params: ParamSet) -> Result<Self> {
        let reference = Self::init(config, 0)?;
        check_layout(&reference.params, &params)?;
        Ok(Self {
            config: config.clone(),
            image_encoder: Mlp::lookup(&params, "image_encoder", 2)?,
            text_encoder: Mlp::lookup(&params, "text_encoder", 2)?,
            converter_v2t: Mlp::lookup(&params, "converter_v2t", 2)?,
            converter_t2v: Mlp::lookup(&params, "converter_t2v", 2)?,
            fusion: Mlp::lookup(&params, "fusion", 3)?,
            classifier: Mlp::lookup(&params, "classifier", 1)?,
            params,
        })
    }

    pub fn converter(&self, dir: Direction) -> &Mlp {
        match dir {
            Direction::ImageToText => &self.converter_v2t,
            Direction::TextToImage => &self.converter_t2v,
        }
    }

    /// Encodes the present modalities; absent ones yield `None`.
    pub fn encode(&self, tape: &mut Tape<'_>, sample: &Sample) -> Result<(Option<Var>, Option<Var>)> {
        check_raw(&self.config, sample)?;
        let f_v = if sample.lambda_v {
            let x = tape.constant_vec(sample.raw_image.clone());
            Some(self.image_encoder.forward(tape, x)?)
        } else {
            None
        };
        let f_t = if sample.lambda_t {
            let x = tape.constant_vec(sample.raw_text.clone());
            Some(self.text_encoder.forward(tape, x)?)
        } else {
            None
        };
        Ok((f_v, f_t))
    }

    pub fn convert(&self, tape: &mut Tape<'_>, f: Var, dir: Direction) -> Result<Var> {
        let d = tape.value(f).len();
        if d != self.config.feature_dim {
            return Err(Error::Dimension {
                lhs: vec![self.config.feature_dim],
                rhs: vec![d],
            });
        }
        self.converter(dir).forward(tape, f)
    }

    /// Pair expansion and weighted fusion of already encoded features.
    pub fn expand_and_fuse(
        &self,
        tape: &mut Tape<'_>,
        f_v: Option<Var>,
        f_t: Option<Var>,
        weighting: Weighting<'_>,
        options: FusionOptions,
    ) -> Result<FusedVars> {
        if f_v.is_none() && f_t.is_none() {
            return Err(Error::Constraint("both modalities are missing".into()));
        }
        let rec_t = f_v.map(|f| self.convert(tape, f, Direction::ImageToText)).transpose()?;
        let rec_v = f_t.map(|f| self.convert(tape, f, Direction::TextToImage)).transpose()?;

        let quality = match weighting {
            Weighting::Quality { image, text } if options.gaussian_weighting => Some((image, text)),
            _ => None,
        };
        let prob = |tape: &mut Tape<'_>, f: Var, stats: &DistributionStats| {
            tape.gaussian(f, &stats.mean, stats.floored_std())
        };

        // (image-side feature, text-side feature) per branch.
        let mut pairs: [Option<(Var, Var)>; 3] = [None, None, None];
        if options.pair_expansion {
            if let (Some(v), Some(t)) = (f_v, f_t) {
                pairs[0] = Some((v, t));
            }
            if let (Some(v), Some(rt)) = (f_v, rec_t) {
                pairs[1] = Some((v, rt));
            }
            if let (Some(rv), Some(t)) = (rec_v, f_t) {
                pairs[2] = Some((rv, t));
            }
        } else {
            let v = f_v.or(rec_v).expect("one modality present");
            let t = f_t.or(rec_t).expect("one modality present");
            pairs[0] = Some((v, t));
        }

        let mut weights: [Option<Var>; 3] = [None, None, None];
        match quality {
            // Normalised quality weights are a softmax over log-weights, so
            // branches far from both distributions never underflow to 0/0.
            Some((image, text)) if options.normalize_weights => {
                let mut logs: [Option<Var>; 3] = [None, None, None];
                for (slot, pair) in logs.iter_mut().zip(&pairs) {
                    let Some((v, t)) = *pair else { continue };
                    let lv = tape.log_gaussian(v, &image.mean, image.floored_std())?;
                    let lt = tape.log_gaussian(t, &text.mean, text.floored_std())?;
                    *slot = Some(tape.add(lv, lt)?);
                }
                let shift = logs
                    .iter()
                    .flatten()
                    .map(|&l| tape.scalar(l))
                    .fold(f64::NEG_INFINITY, f64::max);
                let shift = tape.constant_scalar(shift);
                for (slot, l) in weights.iter_mut().zip(logs) {
                    if let Some(l) = l {
                        let centred = tape.sub(l, shift)?;
                        *slot = Some(tape.exp(centred));
                    }
                }
                let active: Vec<Var> = weights.iter().flatten().copied().collect();
                let total = tape.sum(&active)?;
                for w in weights.iter_mut().flatten() {
                    *w = tape.div(*w, total)?;
                }
            }
            _ => {
                for (slot, pair) in weights.iter_mut().zip(&pairs) {
                    let Some((v, t)) = *pair else { continue };
                    *slot = Some(match quality {
                        Some((image, text)) => {
                            let pv = prob(tape, v, image)?;
                            let pt = prob(tape, t, text)?;
                            tape.mul(pv, pt)?
                        }
                        None => tape.constant_scalar(1.0),
                    });
                }
                if options.normalize_weights {
                    let active: Vec<Var> = weights.iter().flatten().copied().collect();
                    let total = tape.sum(&active)?;
                    for w in weights.iter_mut().flatten() {
                        *w = tape.div(*w, total)?;
                    }
                }
            }
        }

        let mut contributions: [Option<Var>; 3] = [None, None, None];
        for k in 0..3 {
            if let (Some((v, t)), Some(w)) = (pairs[k], weights[k]) {
                let joined = tape.concat(v, t)?;
                let fused = self.fusion.forward(tape, joined)?;
                contributions[k] = Some(tape.scale(fused, w)?);
            }
        }
        let active: Vec<Var> = contributions.iter().flatten().copied().collect();
        let fused = tape.sum(&active)?;
        let logits = self.classify(tape, fused)?;
        Ok(FusedVars {
            f_v,
            f_t,
            rec_t,
            rec_v,
            weights,
            contributions,
            fused,
            logits,
        })
    }

    /// `W·M + b`; probabilities are the softmax of the returned logits.
    pub fn classify(&self, tape: &mut Tape<'_>, fused: Var) -> Result<Var> {
        self.classifier.forward(tape, fused)
    }

    /// Full forward pass of one sample, returning plain values.
    pub fn forward(&self, sample: &Sample, weighting: Weighting<'_>, options: FusionOptions) -> Result<FusedResult> {
        let mut tape = Tape::new(&self.params);
        let (f_v, f_t) = self.encode(&mut tape, sample)?;
        let fv = self.expand_and_fuse(&mut tape, f_v, f_t, weighting, options)?;
        Ok(fused_values(&tape, &fv, self.config.feature_dim, self.config.fused_dim))
    }
}

pub(crate) fn fused_values(tape: &Tape<'_>, fv: &FusedVars, d: usize, dm: usize) -> FusedResult {
    let vec_or_zero = |v: Option<Var>, n: usize| v.map_or_else(|| vec![0.0; n], |v| tape.data(v).to_vec());
    let logits = tape.data(fv.logits).to_vec();
    FusedResult {
        f_v: vec_or_zero(fv.f_v, d),
        f_t: vec_or_zero(fv.f_t, d),
        rec_v: vec_or_zero(fv.rec_v, d),
        rec_t: vec_or_zero(fv.rec_t, d),
        weights: fv.weights.map(|w| w.map_or(0.0, |w| tape.scalar(w))),
        contributions: fv.contributions.map(|c| vec_or_zero(c, dm)),
        fused: tape.data(fv.fused).to_vec(),
        probs: softmax(&logits),
        logits,
    }
}

fn check_raw(config: &ModelConfig, sample: &Sample) -> Result<()> {
    if sample.raw_image.len() != config.raw_image_dim || sample.raw_text.len() != config.raw_text_dim {
        return Err(Error::Dimension {
            lhs: vec![config.raw_image_dim, config.raw_text_dim],
            rhs: vec![sample.raw_image.len(), sample.raw_text.len()],
        });
    }
    Ok(())
}

fn check_layout(reference: &ParamSet, loaded: &ParamSet) -> Result<()> {
    for (name, t) in reference.iter() {
        match loaded.by_name(name) {
            Some(l) if l.shape() == t.shape() => {}
            Some(l) => {
                return Err(Error::Dimension {
                    lhs: t.shape().to_vec(),
                    rhs: l.shape().to_vec(),
                })
            }
            None => {
                return Err(Error::Config {
                    key: name.to_string(),
                    reason: "missing parameter".into(),
                })
            }
        }
    }
    if reference.len() != loaded.len() {
        return Err(Error::Config {
            key: "params".into(),
            reason: format!("expected {} tensors, found {}", reference.len(), loaded.len()),
        });
    }
    Ok(())
}

/// Concat-fusion baseline: same encoders and fusion MLP, absent modalities
/// enter as blank raw vectors, no converters, no quality weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub config: ModelConfig,
    pub params: ParamSet,
    pub image_encoder: Mlp,
    pub text_encoder: Mlp,
    pub fusion: Mlp,
    pub classifier: Mlp,
}

impl BaselineModel {
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let c = config;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let image_encoder = Mlp::build(&mut params, "image_encoder", &[c.raw_image_dim, c.hidden, c.feature_dim], &mut rng)?;
        let text_encoder = Mlp::build(&mut params, "text_encoder", &[c.raw_text_dim, c.hidden, c.feature_dim], &mut rng)?;
        let fusion = Mlp::build(&mut params, "fusion", &[2 * c.feature_dim, c.hidden, c.hidden, c.fused_dim], &mut rng)?;
        let classifier = Mlp::build(&mut params, "classifier", &[c.fused_dim, c.num_classes], &mut rng)?;
        Ok(Self {
            config: config.clone(),
            params,
            image_encoder,
            text_encoder,
            fusion,
            classifier,
        })
    }

    pub fn from_params(config: &ModelConfig, params: ParamSet) -> Result<Self> {
        let reference = Self::init(config, 0)?;
        check_layout(&reference.params, &params)?;
        Ok(Self {
            config: config.clone(),
            image_encoder: Mlp::lookup(&params, "image_encoder", 2)?,
            text_encoder: Mlp::lookup(&params, "text_encoder", 2)?,
            fusion: Mlp::lookup(&params, "fusion", 3)?,
            classifier: Mlp::lookup(&params, "classifier", 1)?,
            params,
        })
    }

    /// Logits node for one sample.
    pub fn logits(&self, tape: &mut Tape<'_>, sample: &Sample) -> Result<Var> {
        check_raw(&self.config, sample)?;
        let x_v = tape.constant_vec(sample.raw_image.clone());
        let x_t = tape.constant_vec(sample.raw_text.clone());
        let f_v = self.image_encoder.forward(tape, x_v)?;
        let f_t = self.text_encoder.forward(tape, x_t)?;
        let joined = tape.concat(f_v, f_t)?;
        let fused = self.fusion.forward(tape, joined)?;
        self.classifier.forward(tape, fused)
    }

    pub fn predict_proba(&self, sample: &Sample) -> Result<Vec<f64>> {
        let mut tape = Tape::new(&self.params);
        let logits = self.logits(&mut tape, sample)?;
        Ok(softmax(tape.data(logits)))
    }
}
