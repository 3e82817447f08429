//! Synthetic two-modality samples and the corruption/discard disruptions.
//!
//! Both modalities are drawn from isotropic class-conditional Gaussians
//! with their own class means. A configurable share of samples gets an
//! image drawn from a different class than its text (the label follows
//! the text).

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value written into masked or discarded coordinates.
pub const MASK_VALUE: f64 = 0.0;

/// The two input channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image,
    Text,
}

impl Modality {
    pub fn other(self) -> Self {
        match self {
            Modality::Image => Modality::Text,
            Modality::Text => Modality::Image,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Text => "text",
        }
    }
}

impl FromStr for Modality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "image" | "v" => Ok(Modality::Image),
            "text" | "t" => Ok(Modality::Text),
            _ => Err(Error::Config {
                key: "modality".into(),
                reason: format!("unknown modality {s:?}"),
            }),
        }
    }
}

/// One image-text pair with presence flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub raw_image: Vec<f64>,
    pub raw_text: Vec<f64>,
    pub label: usize,
    pub lambda_v: bool,
    pub lambda_t: bool,
    /// Bookkeeping only; never consulted when building model inputs.
    pub corrupted_v: bool,
    pub corrupted_t: bool,
}

impl Sample {
    pub fn present(&self, m: Modality) -> bool {
        match m {
            Modality::Image => self.lambda_v,
            Modality::Text => self.lambda_t,
        }
    }

    pub fn raw(&self, m: Modality) -> &[f64] {
        match m {
            Modality::Image => &self.raw_image,
            Modality::Text => &self.raw_text,
        }
    }

    fn raw_mut(&mut self, m: Modality) -> &mut Vec<f64> {
        match m {
            Modality::Image => &mut self.raw_image,
            Modality::Text => &mut self.raw_text,
        }
    }

    fn mark_corrupted(&mut self, m: Modality) {
        match m {
            Modality::Image => self.corrupted_v = true,
            Modality::Text => self.corrupted_t = true,
        }
    }

    pub fn corrupted(&self, m: Modality) -> bool {
        match m {
            Modality::Image => self.corrupted_v,
            Modality::Text => self.corrupted_t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub num_classes: usize,
    pub image_dim: usize,
    pub text_dim: usize,
    /// Norm of every class mean vector; pairwise distances scale with it.
    pub separation: f64,
    /// Per-coordinate standard deviation around the class mean.
    pub spread: f64,
    /// Norm of a per-modality offset shared by every sample, so that the
    /// mask value lies away from the data.
    pub offset: f64,
    pub mismatch_rate: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_classes: 3,
            image_dim: 32,
            text_dim: 32,
            separation: 3.0,
            spread: 1.0,
            offset: 3.0,
            mismatch_rate: 0.1,
            n_train: 2400,
            n_val: 300,
            n_test: 300,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::Config {
                key: key.into(),
                reason: reason.into(),
            })
        };
        if self.num_classes < 2 {
            return bad("num_classes", "need at least two classes");
        }
        if self.image_dim == 0 || self.text_dim == 0 {
            return bad("image_dim/text_dim", "dimensions must be positive");
        }
        if !(0.0..=1.0).contains(&self.mismatch_rate) {
            return bad("mismatch_rate", "must lie in [0, 1]");
        }
        if self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return bad("n_train/n_val/n_test", "split sizes must be at least 1");
        }
        if !(self.spread >= 0.0) || !self.separation.is_finite() {
            return bad("spread", "must be finite and non-negative");
        }
        if !(self.offset >= 0.0 && self.offset.is_finite()) {
            return bad("offset", "must be finite and non-negative");
        }
        Ok(())
    }

    /// `key=value` pairs describing the effective configuration.
    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("num_classes".into(), self.num_classes.to_string()),
            ("image_dim".into(), self.image_dim.to_string()),
            ("text_dim".into(), self.text_dim.to_string()),
            ("separation".into(), self.separation.to_string()),
            ("spread".into(), self.spread.to_string()),
            ("offset".into(), self.offset.to_string()),
            ("mismatch_rate".into(), self.mismatch_rate.to_string()),
            ("n_train".into(), self.n_train.to_string()),
            ("n_val".into(), self.n_val.to_string()),
            ("n_test".into(), self.n_test.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

/// Train/validation/test splits produced by [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: GeneratorConfig,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Random unit directions scaled to `separation`, one per class.
fn class_means(rng: &mut ChaCha8Rng, classes: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..classes)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| x * separation / n).collect()
        })
        .collect()
}

fn draw(rng: &mut ChaCha8Rng, mean: &[f64], spread: f64) -> Vec<f64> {
    if spread == 0.0 {
        return mean.to_vec();
    }
    let noise = Normal::new(0.0, spread).expect("spread validated");
    mean.iter().map(|m| m + noise.sample(rng)).collect()
}

/// Draws all three splits from a single seeded stream.
pub fn generate(config: &GeneratorConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let s = config.num_classes;
    let mut image_means = class_means(&mut rng, s, config.image_dim, config.separation);
    let mut text_means = class_means(&mut rng, s, config.text_dim, config.separation);
    for (means, dim) in [(&mut image_means, config.image_dim), (&mut text_means, config.text_dim)] {
        let shift = &class_means(&mut rng, 1, dim, config.offset)[0];
        for m in means.iter_mut() {
            m.iter_mut().zip(shift).for_each(|(a, b)| *a += b);
        }
    }

    let mut split = |n: usize| -> Vec<Sample> {
        (0..n)
            .map(|i| {
                // Balanced labels, shuffled by the split-level permutation below.
                let label = i % s;
                let image_class = if rng.random_bool(config.mismatch_rate) {
                    let offset = rng.random_range(1..s);
                    (label + offset) % s
                } else {
                    label
                };
                Sample {
                    raw_image: draw(&mut rng, &image_means[image_class], config.spread),
                    raw_text: draw(&mut rng, &text_means[label], config.spread),
                    label,
                    lambda_v: true,
                    lambda_t: true,
                    corrupted_v: false,
                    corrupted_t: false,
                }
            })
            .collect()
    };
    let mut train = split(config.n_train);
    let mut val = split(config.n_val);
    let mut test = split(config.n_test);
    train.shuffle(&mut rng);
    val.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok(Dataset {
        config: config.clone(),
        train,
        val,
        test,
    })
}

/// Masks `⌊u·dim⌋` distinct coordinates, `u ~ U[low, high]`.
pub fn corrupt<R: Rng + ?Sized>(v: &mut [f64], fraction_range: (f64, f64), rng: &mut R) {
    let (lo, hi) = fraction_range;
    let u = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let k = ((u * v.len() as f64).floor() as usize).min(v.len());
    for i in index::sample(rng, v.len(), k) {
        v[i] = MASK_VALUE;
    }
}

/// Marks `m` as missing and blanks its raw vector.
///
/// Refuses to remove the last present modality of a sample.
pub fn discard(sample: &mut Sample, m: Modality) -> Result<()> {
    if !sample.present(m.other()) {
        return Err(Error::Constraint(format!(
            "cannot discard {}: {} is already missing",
            m.as_str(),
            m.other().as_str()
        )));
    }
    match m {
        Modality::Image => sample.lambda_v = false,
        Modality::Text => sample.lambda_t = false,
    }
    sample.raw_mut(m).fill(MASK_VALUE);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Fixed,
    Random,
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(Strategy::Fixed),
            "random" => Ok(Strategy::Random),
            _ => Err(Error::Config {
                key: "strategy".into(),
                reason: format!("unknown strategy {s:?}"),
            }),
        }
    }
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Fixed => "fixed",
            Strategy::Random => "random",
        }
    }
}

/// Corruption only (C), discard only (D), or half of each (C+D).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "C")]
    Corrupt,
    #[serde(rename = "D")]
    Discard,
    #[serde(rename = "C+D")]
    Both,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Corrupt, Setting::Discard, Setting::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Corrupt => "C",
            Setting::Discard => "D",
            Setting::Both => "C+D",
        }
    }
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C" => Ok(Setting::Corrupt),
            "D" => Ok(Setting::Discard),
            "C+D" | "CD" => Ok(Setting::Both),
            _ => Err(Error::Config {
                key: "setting".into(),
                reason: format!("unknown setting {s:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Inference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisruptionSpec {
    pub strategy: Strategy,
    pub setting: Setting,
    /// Modality hit by the fixed strategy.
    pub fixed_target: Modality,
    /// Share of disrupted samples under the random strategy.
    pub dr: f64,
    pub corrupt_fraction_range: (f64, f64),
    pub seed: u64,
}

impl Default for DisruptionSpec {
    fn default() -> Self {
        Self {
            strategy: Strategy::Random,
            setting: Setting::Both,
            fixed_target: Modality::Text,
            dr: 0.0,
            corrupt_fraction_range: (0.4, 0.8),
            seed: 0,
        }
    }
}

impl DisruptionSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn random(setting: Setting, dr: f64, seed: u64) -> Self {
        Self {
            strategy: Strategy::Random,
            setting,
            dr,
            seed,
            ..Self::default()
        }
    }

    pub fn fixed(setting: Setting, target: Modality, seed: u64) -> Self {
        Self {
            strategy: Strategy::Fixed,
            setting,
            fixed_target: target,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.corrupt_fraction_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::Config {
                key: "corrupt_fraction_range".into(),
                reason: format!("need 0 <= low <= high <= 1, got ({lo}, {hi})"),
            });
        }
        if !(0.0..=1.0).contains(&self.dr) {
            return Err(Error::Config {
                key: "dr".into(),
                reason: format!("must lie in [0, 1], got {}", self.dr),
            });
        }
        Ok(())
    }

    /// True when applying the spec in `phase` changes nothing.
    pub fn is_identity(&self, phase: Phase) -> bool {
        match self.strategy {
            Strategy::Fixed => phase == Phase::Train,
            Strategy::Random => self.dr == 0.0,
        }
    }

    /// Number of samples disrupted out of `n` under the random strategy.
    pub fn disrupted_count(&self, n: usize) -> usize {
        ((self.dr * n as f64).round() as usize).min(n)
    }

    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("strategy".into(), self.strategy.as_str().into()),
            ("setting".into(), self.setting.as_str().into()),
            ("fixed_target".into(), self.fixed_target.as_str().into()),
            ("dr".into(), self.dr.to_string()),
            (
                "corrupt_fraction_range".into(),
                format!("{},{}", self.corrupt_fraction_range.0, self.corrupt_fraction_range.1),
            ),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

fn disrupt_one<R: Rng + ?Sized>(
    sample: &mut Sample,
    m: Modality,
    corrupt_it: bool,
    range: (f64, f64),
    rng: &mut R,
) -> Result<()> {
    if corrupt_it {
        corrupt(sample.raw_mut(m), range, rng);
        sample.mark_corrupted(m);
        Ok(())
    } else {
        discard(sample, m)
    }
}

/// Applies a disruption protocol to a copy of `samples`.
///
/// Under the fixed strategy training data is never touched; at inference
/// every sample loses quality on the target modality. Under the random
/// strategy a seeded shuffle picks `round(dr·n)` samples, each of which
/// gets one uniformly chosen modality disrupted. For C+D the disrupted
/// samples alternate corrupt/discard by their position in the shuffle.
pub fn apply_disruption(samples: &[Sample], spec: &DisruptionSpec, phase: Phase) -> Result<Vec<Sample>> {
    spec.validate()?;
    let mut out = samples.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let choose_corrupt = |pos: usize| match spec.setting {
        Setting::Corrupt => true,
        Setting::Discard => false,
        Setting::Both => pos % 2 == 0,
    };
    match spec.strategy {
        Strategy::Fixed => {
            if phase == Phase::Train {
                return Ok(out);
            }
            for (pos, s) in out.iter_mut().enumerate() {
                disrupt_one(s, spec.fixed_target, choose_corrupt(pos), spec.corrupt_fraction_range, &mut rng)?;
            }
        }
        Strategy::Random => {
            let k = spec.disrupted_count(out.len());
            let mut order: Vec<usize> = (0..out.len()).collect();
            order.shuffle(&mut rng);
            for (pos, &i) in order.iter().take(k).enumerate() {
                let s = &mut out[i];
                let mut m = if rng.random_bool(0.5) {
                    Modality::Image
                } else {
                    Modality::Text
                };
                // Inputs that already miss a modality only have one to give.
                if !s.present(m.other()) {
                    m = m.other();
                }
                let c = choose_corrupt(pos) || !s.present(m.other());
                disrupt_one(s, m, c, spec.corrupt_fraction_range, &mut rng)?;
            }
        }
    }
    Ok(out)
}

const DATASET_MAGIC: &str = "# drf-dataset v1";

fn fmt_flag(b: bool) -> char {
    if b {
        '1'
    } else {
        '0'
    }
}

/// Serialises one split as line-delimited records.
///
/// Header lines start with `#` and echo `extra` key/value pairs. Each record
/// is `label lambda_v lambda_t corrupted_v corrupted_t` followed by the image
/// values then the text values, space separated.
pub fn write_samples(samples: &[Sample], extra: &[(String, String)]) -> String {
    let mut out = String::new();
    out.push_str(DATASET_MAGIC);
    out.push('\n');
    let (dv, dt) = samples
        .first()
        .map_or((0, 0), |s| (s.raw_image.len(), s.raw_text.len()));
    let _ = writeln!(out, "# image_dim={dv}");
    let _ = writeln!(out, "# text_dim={dt}");
    let _ = writeln!(out, "# count={}", samples.len());
    for (k, v) in extra {
        let _ = writeln!(out, "# {k}={v}");
    }
    for s in samples {
        let _ = write!(
            out,
            "{} {} {} {} {}",
            s.label,
            fmt_flag(s.lambda_v),
            fmt_flag(s.lambda_t),
            fmt_flag(s.corrupted_v),
            fmt_flag(s.corrupted_t)
        );
        for x in s.raw_image.iter().chain(&s.raw_text) {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    out
}

/// Parses a split written by [`write_samples`]. Returns samples and header pairs.
pub fn read_samples(text: &str) -> Result<(Vec<Sample>, Vec<(String, String)>)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == DATASET_MAGIC => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                reason: "missing dataset header".into(),
            })
        }
    }
    let mut header = Vec::new();
    let mut samples = Vec::new();
    let (mut dv, mut dt) = (None, None);
    for (i, line) in lines {
        let lineno = i + 1;
        let perr = |reason: String| Error::Parse { line: lineno, reason };
        if let Some(h) = line.strip_prefix('#') {
            if let Some((k, v)) = h.trim().split_once('=') {
                let (k, v) = (k.trim().to_string(), v.trim().to_string());
                match k.as_str() {
                    "image_dim" => dv = Some(v.parse::<usize>().map_err(|e| perr(e.to_string()))?),
                    "text_dim" => dt = Some(v.parse::<usize>().map_err(|e| perr(e.to_string()))?),
                    _ => {}
                }
                header.push((k, v));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (dv, dt) = match (dv, dt) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(perr("record before image_dim/text_dim header".into())),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 + dv + dt {
            return Err(perr(format!("expected {} fields, found {}", 5 + dv + dt, fields.len())));
        }
        let flag = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(perr(format!("bad flag {other:?}"))),
        };
        let values = fields[5..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| perr(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        let sample = Sample {
            label: fields[0].parse().map_err(|_| perr(format!("bad label {:?}", fields[0])))?,
            lambda_v: flag(fields[1])?,
            lambda_t: flag(fields[2])?,
            corrupted_v: flag(fields[3])?,
            corrupted_t: flag(fields[4])?,
            raw_image: values[..dv].to_vec(),
            raw_text: values[dv..].to_vec(),
        };
        if !sample.lambda_v && !sample.lambda_t {
            return Err(perr("both modalities missing".into()));
        }
        samples.push(sample);
    }
    Ok((samples, header))
}
