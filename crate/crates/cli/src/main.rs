//! `grushin`: run experiments from TOML configs and export plot data.
//!
//! Exit status: 0 when every `[[assert]]` passes, 1 when one fails, 2 for
//! invalid configs, I/O errors and missing series (with a JSON error record
//! on stdout), 3 when a solve ends in `nan_abort`. The worker pool size is
//! read from `RAYON_NUM_THREADS`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod assertions;
mod config;
mod experiments;
mod export;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use config::Kind;
use failure::Failure;
use output::{to_json_string, Artifacts};

const EXIT_ASSERTION: u8 = 1;
const EXIT_FAILURE: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Parser)]
#[command(name = "grushin", version, about = "Grushin heat equation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; defaults apply to anything left out.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set params.p2=7/3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Critical exponents and the global-existence verdict.
    Exponents(RunArgs),
    /// Normalization, positivity, symmetry and scaling of the heat kernel.
    KernelCheck(RunArgs),
    /// Fitted decay slope of `‖S(t)u0‖_q`.
    DecayFit(RunArgs),
    /// One time-marching run.
    Solve(RunArgs),
    /// Picard iteration, with a contraction-window search when no horizon is given.
    Picard(RunArgs),
    /// Ordering or free-domination checks.
    Compare(RunArgs),
    /// Outcome grid over `(p1, p2)` plus regime-boundary curves.
    PhaseScan(RunArgs),
    /// Convert series files (or run directories) to gnuplot data.
    Export {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn report_failure(experiment: &str, f: &Failure) -> ExitCode {
    let record = json!({ "experiment": experiment, "error": f });
    print!("{}", to_json_string(&record));
    eprintln!("grushin {experiment}: {f}");
    ExitCode::from(EXIT_FAILURE)
}

fn run_experiment(kind: Kind, args: &RunArgs) -> Result<u8, Failure> {
    let cfg = config::load(kind, args.config.as_deref(), &args.set, args.out.as_deref())?;
    let mut artifacts = Artifacts::new(cfg.output_dir())?;
    let outcome = experiments::run(kind, &cfg, &mut artifacts)?;
    let mut summary = json!({
        "experiment": kind.name(),
        "config": output::to_value(&cfg),
        "results": outcome.results,
    });
    let checks = assertions::evaluate(&cfg.assertions, &summary);
    let passed = checks.iter().all(|c| c.passed);
    let mut names = artifacts.names().to_vec();
    names.push("summary.json".into());
    let object = summary.as_object_mut().expect("summary is an object");
    object.insert("assertions".into(), output::to_value(&checks));
    object.insert("passed".into(), Value::Bool(passed));
    object.insert("warnings".into(), output::to_value(&outcome.warnings));
    object.insert("artifacts".into(), output::to_value(&names));
    artifacts.write("summary.json", |w| w.write_all(to_json_string(&summary).as_bytes()))?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for c in checks.iter().filter(|c| !c.passed) {
        eprintln!("assertion failed: {} {:?} (actual {})", c.spec.path, c.spec.op, c.actual);
    }
    let summary_path = artifacts.dir().join("summary.json");
    eprintln!("{} -> {}", kind.name(), summary_path.display());
    Ok(if outcome.aborted {
        EXIT_ABORT
    } else if passed {
        0
    } else {
        EXIT_ASSERTION
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Exponents(a) => (Kind::Exponents, a),
        Command::KernelCheck(a) => (Kind::KernelCheck, a),
        Command::DecayFit(a) => (Kind::DecayFit, a),
        Command::Solve(a) => (Kind::Solve, a),
        Command::Picard(a) => (Kind::Picard, a),
        Command::Compare(a) => (Kind::Compare, a),
        Command::PhaseScan(a) => (Kind::PhaseScan, a),
        Command::Export { inputs, out } => {
            return match export::export(inputs, out) {
                Ok(files) => {
                    print!("{}", to_json_string(&json!({ "experiment": "export", "files": files })));
                    ExitCode::SUCCESS
                }
                Err(f) => report_failure("export", &f),
            }
        }
    };
    match run_experiment(kind, args) {
        Ok(code) => ExitCode::from(code),
        Err(f) => report_failure(kind.name(), &f),
    }
}
