//! Command-line front end: `gen`, `train`, `eval`, `sweep` and `report`.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 usage or
//! configuration error, 3 missing input, 4 training divergence.

pub mod args;
pub mod artifacts;
pub mod config;
pub mod report;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::Parser;
use drf_core::synthdata::{generate, Dataset, Sample};
use drf_core::trainer::sweep::{results_from_csv, results_to_csv, sweep};
use drf_core::trainer::{
    evaluate, evaluate_baseline, log_to_csv, read_checkpoint, train, train_baseline, write_checkpoint, Checkpoint,
    EvalReport, ModelKind, TrainConfig,
};

use args::{Cli, Command, EvalArgs, GenArgs, ReportArgs, SweepArgs, TrainArgs};
use artifacts::{load_dataset, load_split, prefixed, read_input, require, save_dataset, write_atomic};
use config::FileConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    MissingInput(PathBuf),
    Diverged {
        message: String,
        last_finite: Option<String>,
    },
    Core(drf_core::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::Diverged { .. } => 4,
            CliError::Core(drf_core::Error::Config { .. } | drf_core::Error::Parse { .. }) => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::MissingInput(p) => write!(f, "missing input: {}", p.display()),
            CliError::Diverged { message, last_finite } => {
                write!(f, "{message}")?;
                match last_finite {
                    Some(row) => write!(f, "\nlast finite log row:\n{}\n{row}", drf_core::trainer::LogRow::CSV_HEADER),
                    None => write!(f, "\nno finite log row was recorded"),
                }
            }
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<drf_core::Error> for CliError {
    fn from(e: drf_core::Error) -> Self {
        match e {
            drf_core::Error::Diverged { ref last_finite, .. } => CliError::Diverged {
                last_finite: last_finite.clone(),
                message: e.to_string(),
            },
            drf_core::Error::Io(io) => CliError::Io(io),
            other => CliError::Core(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit status. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Gen(a) => cmd_gen(file, a),
        Command::Train(a) => cmd_train(file, a),
        Command::Eval(a) => cmd_eval(file, a),
        Command::Sweep(a) => cmd_sweep(file, a),
        Command::Report(a) => cmd_report(a),
    }
}

fn cmd_gen(file: FileConfig, a: &GenArgs) -> Result<(), CliError> {
    let mut g = file.generator;
    config::apply_gen(&mut g, a);
    let data = generate(&g)?;
    save_dataset(&a.out, &data)?;
    println!(
        "wrote {} train / {} val / {} test samples to {}",
        data.train.len(),
        data.val.len(),
        data.test.len(),
        a.out.display()
    );
    Ok(())
}

/// Fits the model's input widths and class count to the dataset.
fn fit_to_data(cfg: &mut TrainConfig, data: &drf_core::synthdata::GeneratorConfig) -> Result<(), CliError> {
    cfg.model.raw_image_dim = data.image_dim;
    cfg.model.raw_text_dim = data.text_dim;
    cfg.model.num_classes = data.num_classes;
    cfg.validate()?;
    Ok(())
}

fn cmd_train(file: FileConfig, a: &TrainArgs) -> Result<(), CliError> {
    let kind: ModelKind = a.model.parse()?;
    let data_dir = require(a.data.as_ref(), "--data")?;
    let mut cfg = file.train;
    config::apply_train(&mut cfg, &a.train)?;
    let mut disruption = file.disruption;
    config::apply_disruption(&mut disruption, &a.disruption)?;
    let (samples, gen) = load_split(&data_dir, "train")?;
    fit_to_data(&mut cfg, &gen)?;

    let mut extra = prefixed("data_", gen.echo());
    extra.extend(prefixed("disruption_", disruption.echo()));
    let (ckpt, log) = match kind {
        ModelKind::Drf => {
            let out = train(&samples, &disruption, &cfg)?;
            (Checkpoint::Drf(out.state), out.log)
        }
        ModelKind::Baseline => {
            let out = train_baseline(&samples, &disruption, &cfg)?;
            (Checkpoint::Baseline(out.state), out.log)
        }
    };
    let mut echo = vec![("model".to_string(), kind.as_str().to_string())];
    echo.extend(cfg.echo());
    echo.extend(extra.iter().cloned());
    write_atomic(&a.out.join("checkpoint.txt"), &write_checkpoint(&ckpt, &extra))?;
    write_atomic(&a.out.join("train_log.csv"), &log_to_csv(&log, &echo))?;
    if let Some(last) = log.last() {
        println!("{} trained: epoch {} total loss {:.6}", kind.as_str(), last.epoch, last.loss.total);
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn split_samples(dir: &Path, split: &str) -> Result<(Vec<Sample>, drf_core::synthdata::GeneratorConfig), CliError> {
    if !artifacts::SPLITS.contains(&split) {
        return Err(CliError::Usage(format!("--split: expected train, val or test, got {split:?}")));
    }
    load_split(dir, split)
}

fn report_json(report: &EvalReport, kind: ModelKind, echo: &[(String, String)]) -> String {
    let config: serde_json::Map<String, serde_json::Value> =
        echo.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect();
    let value = serde_json::json!({
        "model": kind.as_str(),
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "precision": report.precision,
        "recall": report.recall,
        "confusion": report.confusion,
        "config": config,
    });
    let mut s = serde_json::to_string_pretty(&value).expect("json values serialise");
    s.push('\n');
    s
}

fn cmd_eval(file: FileConfig, a: &EvalArgs) -> Result<(), CliError> {
    let ckpt_path = require(a.checkpoint.as_ref(), "--checkpoint")?;
    let data_dir = require(a.data.as_ref(), "--data")?;
    let ckpt = read_checkpoint(&read_input(&ckpt_path)?)?;
    let mut disruption = file.disruption;
    config::apply_disruption(&mut disruption, &a.disruption)?;
    let (samples, gen) = split_samples(&data_dir, &a.split)?;

    let report = match &ckpt {
        Checkpoint::Drf(s) => evaluate(s, &samples, &disruption)?,
        Checkpoint::Baseline(s) => evaluate_baseline(s, &samples, &disruption)?,
    };
    let mut echo = vec![("split".to_string(), a.split.clone())];
    echo.extend(ckpt.config().echo());
    echo.extend(prefixed("data_", gen.echo()));
    echo.extend(prefixed("disruption_", disruption.echo()));
    write_atomic(&a.out.join("eval.json"), &report_json(&report, ckpt.kind(), &echo))?;
    println!(
        "{} on {}: accuracy {:.4} macro-F1 {:.4}",
        ckpt.kind().as_str(),
        a.split,
        report.accuracy,
        report.macro_f1
    );
    Ok(())
}

fn cmd_sweep(file: FileConfig, a: &SweepArgs) -> Result<(), CliError> {
    let data_dir = require(a.data.as_ref(), "--data")?;
    let mut cfg = file.train;
    config::apply_train(&mut cfg, &a.train)?;
    let mut sw = file.sweep;
    config::apply_sweep(&mut sw, a)?;
    let data: Dataset = load_dataset(&data_dir)?;
    fit_to_data(&mut cfg, &data.config)?;

    let out = sweep(&data, &sw, &cfg)?;
    let mut echo = prefixed("data_", data.config.echo());
    echo.extend(cfg.echo());
    echo.extend(sw.echo());
    write_atomic(&a.out.join("results.csv"), &results_to_csv(&out.rows, &echo))?;
    println!("wrote {} result rows to {}", out.rows.len(), a.out.join("results.csv").display());
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<(), CliError> {
    let path = require(a.results.as_ref(), "--results")?;
    let (rows, echo) = results_from_csv(&read_input(&path)?)?;
    for (name, contents) in report::render(&rows, &echo, a.svg) {
        write_atomic(&a.out.join(&name), &contents)?;
    }
    print!("{}", report::summary(&rows, &[]));
    Ok(())
}
