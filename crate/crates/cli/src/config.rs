//! File configuration and flag overrides.
//!
//! Resolution order: built-in defaults, then the TOML file, then flags.

use std::path::Path;
use std::str::FromStr;

use drf_core::queuedist::EnqueueGate;
use drf_core::synthdata::{DisruptionSpec, GeneratorConfig, Modality, Setting, Strategy};
use drf_core::trainer::sweep::SweepConfig;
use drf_core::trainer::TrainConfig;
use serde::Deserialize;

use crate::args::{DisruptionArgs, GenArgs, SweepArgs, TrainFlags};
use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub generator: GeneratorConfig,
    pub disruption: DisruptionSpec,
    pub train: TrainConfig,
    pub sweep: SweepConfig,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {}", e.to_string().trim_end())))
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => Self::parse(&crate::artifacts::read_input(p)?),
        }
    }
}

fn parse_flag<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("--{key}: cannot parse {v:?}")))
}

pub fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_flag(key, s))
        .collect()
}

fn parse_range(key: &str, v: &str) -> Result<(f64, f64), CliError> {
    match parse_list::<f64>(key, v)?.as_slice() {
        [lo, hi] => Ok((*lo, *hi)),
        _ => Err(CliError::Usage(format!("--{key}: expected low,high, got {v:?}"))),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

pub fn apply_gen(g: &mut GeneratorConfig, a: &GenArgs) {
    set(&mut g.num_classes, a.classes);
    set(&mut g.seed, a.seed);
    set(&mut g.image_dim, a.image_dim);
    set(&mut g.text_dim, a.text_dim);
    set(&mut g.separation, a.separation);
    set(&mut g.spread, a.spread);
    set(&mut g.offset, a.offset);
    set(&mut g.mismatch_rate, a.mismatch_rate);
    set(&mut g.n_train, a.n_train);
    set(&mut g.n_val, a.n_val);
    set(&mut g.n_test, a.n_test);
}

pub fn apply_disruption(d: &mut DisruptionSpec, a: &DisruptionArgs) -> Result<(), CliError> {
    if let Some(s) = &a.strategy {
        d.strategy = parse_flag::<Strategy>("strategy", s)?;
    }
    if let Some(s) = &a.setting {
        d.setting = parse_flag::<Setting>("setting", s)?;
    }
    if let Some(t) = &a.target {
        d.fixed_target = parse_flag::<Modality>("target", t)?;
    }
    if let Some(r) = &a.corrupt_range {
        d.corrupt_fraction_range = parse_range("corrupt-range", r)?;
    }
    set(&mut d.dr, a.dr);
    set(&mut d.seed, a.disrupt_seed);
    d.validate()?;
    Ok(())
}

pub fn apply_train(t: &mut TrainConfig, a: &TrainFlags) -> Result<(), CliError> {
    set(&mut t.epochs, a.epochs);
    set(&mut t.batch_size, a.batch_size);
    set(&mut t.seed, a.seed);
    set(&mut t.lr_encoders, a.lr_encoders);
    set(&mut t.lr_rest, a.lr_rest);
    set(&mut t.queue_capacity, a.queue_capacity);
    set(&mut t.n_min, a.n_min);
    set(&mut t.model.feature_dim, a.feature_dim);
    set(&mut t.model.hidden, a.hidden);
    if let Some(g) = &a.gate {
        t.enqueue_gate = parse_flag::<EnqueueGate>("gate", g)?;
    }
    let o = &mut t.objective;
    o.fusion.normalize_weights |= a.normalize_weights;
    o.fusion.gaussian_weighting &= !a.uniform_weights;
    o.fusion.pair_expansion &= !a.no_pair_expansion;
    o.flags.distribution_constraint &= !a.no_distribution_constraint;
    o.flags.sample_recovery &= !a.no_sample_recovery;
    o.flags.distribution_recovery &= !a.no_distribution_recovery;
    Ok(())
}

pub fn apply_sweep(s: &mut SweepConfig, a: &SweepArgs) -> Result<(), CliError> {
    if let Some(v) = &a.strategy {
        s.strategy = parse_flag("strategy", v)?;
    }
    if let Some(v) = &a.settings {
        s.settings = parse_list("settings", v)?;
    }
    if let Some(v) = &a.drs {
        s.drs = parse_list("dr", v)?;
    }
    if let Some(v) = &a.targets {
        s.targets = parse_list("targets", v)?;
    }
    if let Some(v) = &a.seeds {
        s.seeds = parse_list("seeds", v)?;
    }
    if let Some(v) = &a.models {
        s.models = v.split(',').map(|m| m.trim().to_string()).filter(|m| !m.is_empty()).collect();
    }
    if let Some(v) = &a.corrupt_range {
        s.corrupt_fraction_range = parse_range("corrupt-range", v)?;
    }
    s.validate()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(FileConfig::parse("").unwrap(), FileConfig::default());
    }

    #[test]
    fn sections_mirror_modules() {
        let text = r#"
            [generator]
            num_classes = 4
            seed = 7

            [disruption]
            strategy = "fixed"
            setting = "C+D"
            fixed_target = "image"

            [train]
            epochs = 3
            enqueue_gate = "least"

            [train.objective.fusion]
            normalize_weights = true

            [sweep]
            drs = [0.2, 1.0]
            settings = ["C", "D"]
        "#;
        let c = FileConfig::parse(text).unwrap();
        assert_eq!(c.generator.num_classes, 4);
        assert_eq!(c.generator.seed, 7);
        assert_eq!(c.disruption.strategy, Strategy::Fixed);
        assert_eq!(c.disruption.setting, Setting::Both);
        assert_eq!(c.disruption.fixed_target, Modality::Image);
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.enqueue_gate, EnqueueGate::Least);
        assert!(c.train.objective.fusion.normalize_weights);
        assert_eq!(c.sweep.drs, vec![0.2, 1.0]);
        assert_eq!(c.sweep.settings, vec![Setting::Corrupt, Setting::Discard]);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = FileConfig::parse("[train]\nepochz = 3\n").unwrap_err();
        match err {
            CliError::Usage(msg) => assert!(msg.contains("epochz"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flags_override_file() {
        let mut t = FileConfig::parse("[train]\nepochs = 3\nseed = 1\n").unwrap().train;
        let flags = TrainFlags {
            epochs: Some(5),
            uniform_weights: true,
            ..TrainFlags::default()
        };
        apply_train(&mut t, &flags).unwrap();
        assert_eq!(t.epochs, 5);
        assert_eq!(t.seed, 1);
        assert!(!t.objective.fusion.gaussian_weighting);
    }

    #[test]
    fn list_and_range_parsing() {
        assert_eq!(parse_list::<f64>("dr", "0.2,0.4, 1.0").unwrap(), vec![0.2, 0.4, 1.0]);
        assert!(parse_list::<f64>("dr", "0.2,x").is_err());
        assert_eq!(parse_range("r", "0.4,0.8").unwrap(), (0.4, 0.8));
        assert!(parse_range("r", "0.4").is_err());
        let mut d = DisruptionSpec::default();
        let bad = DisruptionArgs {
            dr: Some(1.5),
            ..DisruptionArgs::default()
        };
        assert!(apply_disruption(&mut d, &bad).is_err());
    }
}
