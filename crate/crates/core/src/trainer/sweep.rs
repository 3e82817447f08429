//! Disruption sweeps over settings, ratios and seeds, with tidy result rows.
//!
//! Under the random strategy every (model, setting, dr, seed) cell trains on
//! data disrupted at that ratio and is tested under the same protocol; cells
//! with dr = 0 do not depend on the setting and are trained once. Under the
//! fixed strategy each (model, seed) trains once on clean data and is tested
//! per target and setting. Cells run in parallel.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::synthdata::{Dataset, DisruptionSpec, Modality, Setting, Strategy};

use super::{evaluate, evaluate_baseline, train, train_baseline, DrfState, EvalReport, ModelKind, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub strategy: Strategy,
    pub settings: Vec<Setting>,
    /// Disruption ratios (random strategy only).
    pub drs: Vec<f64>,
    /// Disrupted modalities (fixed strategy only).
    pub targets: Vec<Modality>,
    pub seeds: Vec<u64>,
    pub models: Vec<String>,
    pub corrupt_fraction_range: (f64, f64),
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Random,
            settings: Setting::ALL.to_vec(),
            drs: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            targets: vec![Modality::Image, Modality::Text],
            seeds: vec![0, 1, 2],
            models: vec!["drf".into(), "baseline".into()],
            corrupt_fraction_range: (0.4, 0.8),
        }
    }
}

impl SweepConfig {
    pub fn model_kinds(&self) -> Result<Vec<ModelKind>> {
        self.models.iter().map(|m| m.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::Config { key: key.into(), reason });
        if self.settings.is_empty() {
            return bad("settings", "at least one setting is required".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds", "at least one seed is required".into());
        }
        if self.models.is_empty() {
            return bad("models", "at least one model is required".into());
        }
        self.model_kinds()?;
        match self.strategy {
            Strategy::Random if self.drs.is_empty() => return bad("dr", "at least one ratio is required".into()),
            Strategy::Fixed if self.targets.is_empty() => {
                return bad("targets", "at least one target is required".into())
            }
            _ => {}
        }
        for &dr in &self.drs {
            if !(0.0..=1.0).contains(&dr) {
                return bad("dr", format!("must lie in [0, 1], got {dr}"));
            }
        }
        Ok(())
    }

    pub fn echo(&self) -> Vec<(String, String)> {
        let join = |v: Vec<String>| v.join(",");
        vec![
            ("sweep_strategy".into(), self.strategy.as_str().into()),
            ("sweep_settings".into(), join(self.settings.iter().map(|s| s.as_str().to_string()).collect())),
            ("sweep_drs".into(), join(self.drs.iter().map(f64::to_string).collect())),
            ("sweep_targets".into(), join(self.targets.iter().map(|t| t.as_str().to_string()).collect())),
            ("sweep_seeds".into(), join(self.seeds.iter().map(u64::to_string).collect())),
            ("sweep_models".into(), self.models.join(",")),
            (
                "sweep_corrupt_fraction_range".into(),
                format!("{},{}", self.corrupt_fraction_range.0, self.corrupt_fraction_range.1),
            ),
        ]
    }
}

/// One evaluation of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub strategy: Strategy,
    pub setting: Setting,
    /// Fixed-strategy target; `None` under the random strategy.
    pub target: Option<Modality>,
    pub dr: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
}

pub const RESULT_HEADER: &str = "model,strategy,setting,target,dr,seed,acc,macro_f1";

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.model,
            self.strategy.as_str(),
            self.setting.as_str(),
            self.target.map_or("-", Modality::as_str),
            self.dr,
            self.seed,
            self.accuracy,
            self.macro_f1
        )
    }
}

/// A trained DRF model kept from a sweep cell.
#[derive(Debug, Clone)]
pub struct CellState {
    pub setting: Setting,
    pub dr: f64,
    pub seed: u64,
    pub state: DrfState,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    /// DRF models by cell, in cell order.
    pub drf_states: Vec<CellState>,
}

struct Job {
    model: ModelKind,
    train_spec: DisruptionSpec,
    seed: u64,
    /// (setting, target, dr, evaluation disruption) per emitted row.
    evals: Vec<(Setting, Option<Modality>, f64, DisruptionSpec)>,
    keep: Option<(Setting, f64)>,
}

fn jobs(sweep: &SweepConfig) -> Result<Vec<Job>> {
    let mut out = Vec::new();
    let range = sweep.corrupt_fraction_range;
    let with_range = |mut spec: DisruptionSpec| {
        spec.corrupt_fraction_range = range;
        spec
    };
    for model in sweep.model_kinds()? {
        for &seed in &sweep.seeds {
            match sweep.strategy {
                Strategy::Random => {
                    for &dr in &sweep.drs {
                        if dr == 0.0 {
                            let spec = with_range(DisruptionSpec::random(sweep.settings[0], 0.0, seed));
                            let evals = sweep.settings.iter().map(|&s| (s, None, 0.0, spec.clone())).collect();
                            out.push(Job {
                                model,
                                train_spec: spec,
                                seed,
                                evals,
                                keep: Some((sweep.settings[0], 0.0)),
                            });
                            continue;
                        }
                        for &setting in &sweep.settings {
                            let spec = with_range(DisruptionSpec::random(setting, dr, seed));
                            out.push(Job {
                                model,
                                train_spec: spec.clone(),
                                seed,
                                evals: vec![(setting, None, dr, spec)],
                                keep: Some((setting, dr)),
                            });
                        }
                    }
                }
                Strategy::Fixed => {
                    let mut evals = Vec::new();
                    for &target in &sweep.targets {
                        for &setting in &sweep.settings {
                            let spec = with_range(DisruptionSpec::fixed(setting, target, seed));
                            evals.push((setting, Some(target), 1.0, spec));
                        }
                    }
                    out.push(Job {
                        model,
                        train_spec: with_range(DisruptionSpec::fixed(sweep.settings[0], sweep.targets[0], seed)),
                        seed,
                        evals,
                        keep: None,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn run_job(job: &Job, data: &Dataset, strategy: Strategy, base: &TrainConfig) -> Result<(Vec<ResultRow>, Option<CellState>)> {
    let cfg = TrainConfig {
        seed: job.seed,
        ..base.clone()
    };
    let (reports, state): (Vec<EvalReport>, Option<DrfState>) = match job.model {
        ModelKind::Drf => {
            let trained = train(&data.train, &job.train_spec, &cfg)?.state;
            let reports = job
                .evals
                .iter()
                .map(|(_, _, _, spec)| evaluate(&trained, &data.test, spec))
                .collect::<Result<_>>()?;
            (reports, Some(trained))
        }
        ModelKind::Baseline => {
            let trained = train_baseline(&data.train, &job.train_spec, &cfg)?.state;
            let reports = job
                .evals
                .iter()
                .map(|(_, _, _, spec)| evaluate_baseline(&trained, &data.test, spec))
                .collect::<Result<_>>()?;
            (reports, None)
        }
    };
    let rows = job
        .evals
        .iter()
        .zip(reports)
        .map(|(&(setting, target, dr, _), r)| ResultRow {
            model: job.model.as_str().into(),
            strategy,
            setting,
            target,
            dr,
            seed: job.seed,
            accuracy: r.accuracy,
            macro_f1: r.macro_f1,
        })
        .collect();
    let cell = match (job.keep, state) {
        (Some((setting, dr)), Some(state)) => Some(CellState {
            setting,
            dr,
            seed: job.seed,
            state,
        }),
        _ => None,
    };
    Ok((rows, cell))
}

/// Trains and evaluates every cell; rows come out in a fixed order
/// (model, seed, dr, setting / target) regardless of scheduling.
pub fn sweep(data: &Dataset, sweep: &SweepConfig, train_cfg: &TrainConfig) -> Result<SweepOutput> {
    sweep.validate()?;
    train_cfg.validate()?;
    let jobs = jobs(sweep)?;
    let results = par::map(&jobs, |j| run_job(j, data, sweep.strategy, train_cfg));
    let mut rows = Vec::new();
    let mut drf_states = Vec::new();
    for r in results {
        let (mut r, cell) = r?;
        rows.append(&mut r);
        drf_states.extend(cell);
    }
    Ok(SweepOutput { rows, drf_states })
}

/// Number of training runs a sweep performs.
pub fn training_runs(sweep: &SweepConfig) -> Result<usize> {
    Ok(jobs(sweep)?.len())
}

pub fn results_to_csv(rows: &[ResultRow], echo: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in echo {
        let _ = writeln!(out, "# {k}={v}");
    }
    out.push_str(RESULT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

/// Parses a result table; errors name the offending line.
pub fn results_from_csv(text: &str) -> Result<(Vec<ResultRow>, Vec<(String, String)>)> {
    let mut echo = Vec::new();
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |reason: String| Error::Parse { line: line_no, reason };
        if let Some(kv) = line.strip_prefix('#') {
            if let Some((k, v)) = kv.trim().split_once('=') {
                echo.push((k.to_string(), v.to_string()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line.trim() != RESULT_HEADER {
                return Err(err(format!("expected header {RESULT_HEADER:?}")));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", f.len())));
        }
        let num = |s: &str, what: &str| s.trim().parse::<f64>().map_err(|_| err(format!("bad {what} {s:?}")));
        let target = match f[3] {
            "-" => None,
            t => Some(Modality::from_str(t).map_err(|_| err(format!("bad target {t:?}")))?),
        };
        let row = ResultRow {
            model: f[0].to_string(),
            strategy: f[1].parse().map_err(|_| err(format!("bad strategy {:?}", f[1])))?,
            setting: f[2].parse().map_err(|_| err(format!("bad setting {:?}", f[2])))?,
            target,
            dr: num(f[4], "dr")?,
            seed: f[5].trim().parse().map_err(|_| err(format!("bad seed {:?}", f[5])))?,
            accuracy: num(f[6], "acc")?,
            macro_f1: num(f[7], "macro_f1")?,
        };
        if row.model.is_empty() {
            return Err(err("empty model name".into()));
        }
        rows.push(row);
    }
    if !seen_header {
        return Err(Error::Parse {
            line: 0,
            reason: "missing header line".into(),
        });
    }
    Ok((rows, echo))
}

/// Mean and spread over seeds of one (model, strategy, setting, target, dr) group.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub model: String,
    pub strategy: Strategy,
    pub setting: Setting,
    pub target: Option<Modality>,
    pub dr: f64,
    pub n: usize,
    pub acc_mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub acc_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by everything but the seed, in first-appearance order.
pub fn aggregate(rows: &[ResultRow]) -> Vec<Aggregate> {
    let mut groups: Vec<(&ResultRow, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        let same = |g: &ResultRow| {
            g.model == r.model
                && g.strategy == r.strategy
                && g.setting == r.setting
                && g.target == r.target
                && g.dr.to_bits() == r.dr.to_bits()
        };
        match groups.iter_mut().find(|(k, _)| same(k)) {
            Some((_, members)) => members.push(r),
            None => groups.push((r, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(k, members)| {
            let acc: Vec<f64> = members.iter().map(|m| m.accuracy).collect();
            let f1: Vec<f64> = members.iter().map(|m| m.macro_f1).collect();
            let (acc_mean, acc_std) = mean_std(&acc);
            let (f1_mean, f1_std) = mean_std(&f1);
            Aggregate {
                model: k.model.clone(),
                strategy: k.strategy,
                setting: k.setting,
                target: k.target,
                dr: k.dr,
                n: members.len(),
                acc_mean,
                acc_std,
                f1_mean,
                f1_std,
            }
        })
        .collect()
}
