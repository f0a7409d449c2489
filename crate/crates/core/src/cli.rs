//! Command-line driver: `simulate`, `platoon`, `ccc-compare` and `certify`.
//!
//! Every command writes into `--out`: `summary.json` plus trace CSVs.
//! Exit codes: 0 success, 1 error (configuration or numeric failure),
//! 2 certification failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{self, Check, StabilityReport};
use crate::error::{Error, Result};
use crate::scenario::{self, Scenario};
use crate::sim::{self, ControllerMode, Trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CERTIFICATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "acc-sim", version, about = "Estimator-based safety-critical ACC simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write its trace and report.
    Simulate(RunArgs),
    /// Run a multi-follower scenario and report string-stability gains.
    Platoon(RunArgs),
    /// Run with constant and adaptive error bounds and compare headways.
    CccCompare(RunArgs),
    /// Run and check every certificate; exit 2 if any check fails.
    Certify(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario file path or `preset:NAME`.
    #[arg(long)]
    pub scenario: String,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Seed for the gap-noise hook; ignored when no noise is configured.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl RunArgs {
    fn scenario(&self) -> Result<Scenario> {
        let mut s = scenario::resolve(&self.scenario)?;
        if let Some(dt) = self.dt {
            s.sim.dt = dt;
        }
        if let Some(h) = self.horizon {
            s.sim.horizon = h;
        }
        if let (Some(seed), Some(noise)) = (self.seed, s.sim.gap_noise.as_mut()) {
            noise.seed = seed;
        }
        s.sim.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    command: &'static str,
    scenario: &'a Scenario,
    report: &'a StabilityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    checks: Option<&'a [Check]>,
}

#[derive(Debug, Serialize)]
struct CompareSummary<'a> {
    command: &'static str,
    scenario: &'a Scenario,
    constant: &'a StabilityReport,
    adaptive: &'a StabilityReport,
    mean_h_constant: f64,
    mean_h_adaptive: f64,
}

/// What a command produced, for exit-code mapping.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Ok,
    CertificationFailed(Vec<String>),
}

fn simulate(s: &Scenario) -> Result<(Trace, StabilityReport)> {
    let trace = sim::run_scenario(&s.sim, &s.lead, &s.gains, &s.controller)?;
    let report = StabilityReport::from_trace(&trace, &s.gains, &s.controller, &s.report_context())?;
    Ok((trace, report))
}

fn write_trace(trace: &Trace, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    trace.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_headway_table(constant: &Trace, adaptive: &Trace, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "t")?;
    for i in 1..=constant.follower_count() {
        write!(w, ",f{i}_h_constant,f{i}_h_adaptive,f{i}_epsilon")?;
    }
    writeln!(w)?;
    for (a, b) in constant.records.iter().zip(&adaptive.records) {
        write!(w, "{}", a.t)?;
        for (fa, fb) in a.followers.iter().zip(&b.followers) {
            write!(w, ",{},{},{}", fa.h, fb.h, fb.epsilon)?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs one command, writing artifacts under `args.out`.
pub fn execute(command: &Command) -> Result<Outcome> {
    let (name, args) = match command {
        Command::Simulate(a) => ("simulate", a),
        Command::Platoon(a) => ("platoon", a),
        Command::CccCompare(a) => ("ccc-compare", a),
        Command::Certify(a) => ("certify", a),
    };
    let s = args.scenario()?;
    for w in s.warnings() {
        eprintln!("warning: {w}");
    }
    fs::create_dir_all(&args.out)?;
    let out = |f: &str| args.out.join(f);

    match command {
        Command::Simulate(_) | Command::Platoon(_) => {
            if matches!(command, Command::Platoon(_)) && s.analysis.excitation_omega.is_none() {
                return Err(Error::Config(
                    "platoon needs analysis.excitation_omega to measure string stability".into(),
                ));
            }
            let (trace, report) = simulate(&s)?;
            write_trace(&trace, &out("trace.csv"))?;
            write_json(&Summary { command: name, scenario: &s, report: &report, checks: None }, &out("summary.json"))?;
            Ok(Outcome::Ok)
        }
        Command::CccCompare(_) => {
            let mut constant = s.clone();
            constant.sim.mode = ControllerMode::Baseline;
            let mut adaptive = s.clone();
            adaptive.sim.mode = ControllerMode::Adaptive;
            let (tc, rc) = simulate(&constant)?;
            let (ta, ra) = simulate(&adaptive)?;
            write_trace(&tc, &out("trace_constant.csv"))?;
            write_trace(&ta, &out("trace_adaptive.csv"))?;
            write_headway_table(&tc, &ta, &out("headway_comparison.csv"))?;
            let mean = |r: &StabilityReport| r.mean_h.iter().sum::<f64>() / r.mean_h.len() as f64;
            write_json(
                &CompareSummary {
                    command: name,
                    scenario: &s,
                    constant: &rc,
                    adaptive: &ra,
                    mean_h_constant: mean(&rc),
                    mean_h_adaptive: mean(&ra),
                },
                &out("summary.json"),
            )?;
            Ok(Outcome::Ok)
        }
        Command::Certify(_) => {
            let (trace, report) = simulate(&s)?;
            let checks = analysis::certify(&trace, &s.gains, &s.controller, &s.sim.lyapunov_q, &s.report_context())?;
            write_trace(&trace, &out("trace.csv"))?;
            write_json(
                &Summary { command: name, scenario: &s, report: &report, checks: Some(&checks) },
                &out("summary.json"),
            )?;
            let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
            if failed.is_empty() {
                Ok(Outcome::Ok)
            } else {
                Ok(Outcome::CertificationFailed(failed))
            }
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::CertificationFailed(names)) => {
            eprintln!("certification failed: {}", names.join(", "));
            EXIT_CERTIFICATION
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}
