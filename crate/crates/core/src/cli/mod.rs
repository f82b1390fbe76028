//! Command-line front end: `run`, `export` and `report`.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a
//! pipeline breaks down numerically, 2 for input and configuration errors.

pub mod config;
pub mod export;
pub mod pipeline;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::report::{Check, ResidualReport};
use config::{Pipeline, RunConfig};
use export::{pretty, Artifact, Format};
use pipeline::PipelineOutput;

/// Overrides the output directory of `run`.
pub const OUT_ENV: &str = "FREEBOUNDARY_OUT";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Set when the pipeline stopped early; the checks are then partial.
    pub failed: bool,
    pub error: Option<String>,
    pub pipeline: String,
    pub config: String,
    pub report: ResidualReport,
    pub summary: Value,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.failed || !self.report.all_pass() {
            EXIT_CHECK_FAILED
        } else {
            EXIT_PASS
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "freeboundary", version, about = "Free-boundary branching-point pipelines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a pipeline and write its report and artifacts.
    Run(RunArgs),
    /// Convert a saved artifact to CSV, JSON or SVG.
    Export(ExportArgs),
    /// Summarise a saved report; the exit code follows its checks.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub pipeline: Option<String>,
    /// Grid spacing, decimal or `1/n`.
    #[arg(long)]
    pub h: Option<String>,
    #[arg(long = "lambda-plus")]
    pub lambda_plus: Option<String>,
    #[arg(long = "lambda-minus")]
    pub lambda_minus: Option<String>,
    /// JSON list of `[a, b]` pairs.
    #[arg(long = "K")]
    pub k: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of `csv,json,svg`.
    #[arg(long)]
    pub format: Option<String>,
    /// Any other config key, as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Artifact JSON written by `run` (under `artifacts/`).
    pub input: PathBuf,
    #[arg(long)]
    pub format: String,
    /// Destination file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `report.json` or the directory holding it.
    pub input: PathBuf,
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
        }
    };
    match cli.command {
        Command::Run(a) => match build_config(&a, std::env::var_os(OUT_ENV).map(PathBuf::from)) {
            Ok(cfg) => run(&cfg),
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_INPUT
            }
        },
        Command::Export(a) => export_cmd(&a),
        Command::Report(a) => report_cmd(&a),
    }
}

/// Config file, then the environment's output directory, then flags.
pub fn build_config(a: &RunArgs, env_out: Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::parse(&fs::read_to_string(p).map_err(|e| Error::input(format!("{}: {e}", p.display())))?)?,
        None => RunConfig::default(),
    };
    if let Some(o) = env_out {
        cfg.out = o;
    }
    let flags = [
        ("pipeline", &a.pipeline),
        ("h", &a.h),
        ("lambda_plus", &a.lambda_plus),
        ("lambda_minus", &a.lambda_minus),
        ("K", &a.k),
        ("formats", &a.format),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    for kv in &a.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::input(format!("`--set {kv}`: expected key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(o) = &a.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The pipeline selected by the config.
pub fn dispatch(cfg: &RunConfig) -> Result<PipelineOutput> {
    match cfg.pipeline {
        Pipeline::TwoPlane => pipeline::run_twoplane(cfg.lambda_plus, cfg.lambda_minus, cfg.grid()?),
        Pipeline::Counterexample => {
            let out = pipeline::run_counterexample(&cfg.intervals()?, cfg.h)?;
            let mut out = out;
            if cfg.window != RunConfig::default().window {
                out.report.warn("the counterexample chooses its own window; `window` is ignored");
            }
            Ok(out)
        }
        Pipeline::Obstacle => pipeline::run_obstacle(&cfg.obstacle, cfg.grid()?),
        Pipeline::Verify => verify(cfg),
    }
}

/// Re-runs the configuration stored with an earlier run and compares
/// every check bit for bit.
fn verify(cfg: &RunConfig) -> Result<PipelineOutput> {
    let dir = cfg.input.as_ref().ok_or_else(|| Error::input("`verify` needs `input`"))?;
    let stored = read_report(dir)?;
    let old = RunConfig::parse(&stored.config)?;
    if old.pipeline == Pipeline::Verify {
        return Err(Error::input("cannot verify a verify run"));
    }
    old.validate()?;
    let mut fresh = dispatch(&old)?;
    old.apply_tolerances(&mut fresh.report);
    let mut mismatched = Vec::new();
    for c in &stored.report.checks {
        match fresh.report.get(&c.name) {
            Some(n) if n.sup.to_bits() == c.sup.to_bits() && n.pass == c.pass => {}
            _ => mismatched.push(c.name.clone()),
        }
    }
    let extra = fresh.report.checks.iter().filter(|n| stored.report.get(&n.name).is_none()).count();
    let mut rep = ResidualReport::new();
    rep.extend("replay.", fresh.report);
    let mut c = Check::scalar("verify.mismatched_checks", (mismatched.len() + extra) as f64, 0.0);
    c.samples = stored.report.checks.len();
    rep.push(c);
    rep.push(Check::scalar("verify.stored_failed", stored.failed as u8 as f64, 0.0));
    for m in &mismatched {
        rep.warn(format!("check `{m}` differs from the stored run"));
    }
    let summary = serde_json::json!({ "input_hash": content_of(&stored.config), "stored": dir.display().to_string() });
    Ok(PipelineOutput { report: rep, summary, artifacts: Vec::new() })
}

fn content_of(config: &str) -> String {
    config::content_hash(config.as_bytes())
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(|e| Error::input(format!("{}: {e}", file.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::input(format!("{}: {e}", file.display())))
}

pub fn run(cfg: &RunConfig) -> i32 {
    run_with(cfg, &dispatch)
}

/// `run` with an explicit pipeline; the driver's behaviour (files, exit
/// code, failure marker) does not depend on which pipeline ran.
pub fn run_with(cfg: &RunConfig, runner: &dyn Fn(&RunConfig) -> Result<PipelineOutput>) -> i32 {
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return EXIT_INPUT;
    }
    if let Err(e) = fs::create_dir_all(cfg.out.join("artifacts")) {
        eprintln!("error: cannot create {}: {e}", cfg.out.display());
        return EXIT_INPUT;
    }
    let (record, artifacts, code) = match runner(cfg) {
        Ok(mut out) => {
            cfg.apply_tolerances(&mut out.report);
            let rec = record(cfg, out.report, out.summary, None);
            let code = rec.exit_code();
            (rec, out.artifacts, code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = if e.is_input() { EXIT_INPUT } else { EXIT_CHECK_FAILED };
            (record(cfg, ResidualReport::new(), Value::Null, Some(e.to_string())), Vec::new(), code)
        }
    };
    let written = write_outputs(cfg, &record, &artifacts);
    if let Err(e) = written {
        eprintln!("error: writing outputs: {e}");
        // a report may be half-written; replace it with a failure marker
        let marker = RunReport { failed: true, error: Some(e.to_string()), ..record };
        let _ = pretty(&marker).map(|s| fs::write(cfg.out.join("report.json"), s));
        return EXIT_CHECK_FAILED.max(code);
    }
    for c in record.report.failures() {
        eprintln!("FAIL {} sup {:.3e} > tol {:.3e}", c.name, c.sup, c.tolerance);
    }
    code
}

fn record(cfg: &RunConfig, mut report: ResidualReport, summary: Value, error: Option<String>) -> RunReport {
    report.provenance.h = cfg.h;
    report.provenance.lambda = match cfg.pipeline {
        Pipeline::TwoPlane => Some((cfg.lambda_plus / cfg.lambda_minus).sqrt()),
        _ => None,
    };
    report.provenance.pipeline = cfg.pipeline.name().to_string();
    report.provenance.input_hash = cfg.input_hash();
    RunReport {
        failed: error.is_some(),
        error,
        pipeline: cfg.pipeline.name().to_string(),
        config: cfg.canonical(),
        report,
        summary,
    }
}

fn write_outputs(cfg: &RunConfig, rec: &RunReport, artifacts: &[(String, Artifact)]) -> Result<()> {
    let out = &cfg.out;
    // the failure marker goes first so an interrupted run is never mistaken for a complete one
    let mut pending = rec.clone();
    pending.failed = true;
    pending.error.get_or_insert_with(|| "incomplete".into());
    fs::write(out.join("report.json"), pretty(&pending)?)?;
    fs::write(out.join("config.txt"), &rec.config)?;
    for (name, a) in artifacts {
        fs::write(out.join("artifacts").join(format!("{name}.json")), pretty(a)?)?;
        for &f in &cfg.formats {
            if a.supports(f) {
                fs::write(out.join(format!("{name}.{}", f.extension())), a.render(f)?)?;
            }
        }
    }
    if cfg.formats.contains(&Format::Svg) {
        fs::write(out.join("residuals.svg"), export::residual_strips(&rec.report))?;
    }
    fs::write(out.join("report.json"), pretty(rec)?)?;
    Ok(())
}

fn export_cmd(a: &ExportArgs) -> i32 {
    let go = || -> Result<()> {
        let format: Format = a.format.parse()?;
        let text = fs::read_to_string(&a.input).map_err(|e| Error::input(format!("{}: {e}", a.input.display())))?;
        let art: Artifact = serde_json::from_str(&text).map_err(|e| Error::input(format!("{}: {e}", a.input.display())))?;
        let body = art.render(format)?;
        match &a.out {
            Some(p) => fs::write(p, body)?,
            None => print!("{body}"),
        }
        Ok(())
    };
    match go() {
        Ok(()) => EXIT_PASS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input() {
                EXIT_INPUT
            } else {
                EXIT_CHECK_FAILED
            }
        }
    }
}

fn report_cmd(a: &ReportArgs) -> i32 {
    let rec = match read_report(&a.input) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    println!("pipeline {}  h {}  hash {}", rec.pipeline, rec.report.provenance.h, rec.report.provenance.input_hash);
    if let Some(e) = &rec.error {
        println!("FAILED: {e}");
    }
    for c in &rec.report.checks {
        println!(
            "{} {:<48} sup {:>10.3e}  rms {:>10.3e}  tol {:>9.2e}  n {}{}",
            if c.pass { "pass" } else { "FAIL" },
            c.name,
            c.sup,
            c.rms,
            c.tolerance,
            c.samples,
            if c.excluded > 0 { format!(" (excluded {})", c.excluded) } else { String::new() }
        );
    }
    for w in &rec.report.warnings {
        println!("warning: {w}");
    }
    rec.exit_code()
}
