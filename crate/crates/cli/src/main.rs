#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments, clippy::type_complexity)]

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use disloc::scenario::{exit_code, run_scenario, Operation, OutputFormat, RunOptions, ScenarioConfig};
use disloc::verify::{verify_suite, Suite, VerifyOptions};
use disloc::Error;

#[derive(Parser)]
#[command(name = "disloc", version, about = "Dislocation geometry of continuously dislocated crystals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dislocation density, torsion and holonomy of a frame.
    Analyze(RunArgs),
    /// Burgers vector by circuit and by surface integral.
    Burgers(RunArgs),
    /// Frenet, Hasimoto and climb data along a dislocation line.
    Congruence(RunArgs),
    /// Time evolution of curvature and torsion of a line congruence.
    Evolve(RunArgs),
    /// Material flow, plastic strain and consistency of a distortion history.
    Flow(RunArgs),
    /// Glide on umbilical foliations and Orowan-type shear rates.
    Orowan(RunArgs),
    /// Built-in verification suites.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
            Format::Both => OutputFormat::Both,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.json and CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies every tolerance.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suites to run; all when empty.
    suites: Vec<String>,
    /// Output directory for verify.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Analyze(a) => run(Operation::Analyze, a),
        Command::Burgers(a) => run(Operation::Burgers, a),
        Command::Congruence(a) => run(Operation::Congruence, a),
        Command::Evolve(a) => run(Operation::Evolve, a),
        Command::Flow(a) => run(Operation::Flow, a),
        Command::Orowan(a) => run(Operation::Orowan, a),
        Command::Verify(a) => verify(a),
    };
    ExitCode::from(code as u8)
}

fn fail(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

fn run(op: Operation, a: RunArgs) -> i32 {
    let (cfg, source) = match ScenarioConfig::from_path(&a.config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let opts = RunOptions {
        operation: Some(op),
        seed: a.seed,
        tol_scale: a.tol_scale,
        format: a.format.into(),
    };
    let report = match run_scenario(&cfg, &source, &opts, a.out.as_deref()) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    if a.out.is_none() {
        println!("{}", report.to_json());
    }
    for c in &report.checks {
        let cmp = if c.at_least { ">=" } else { "<=" };
        eprintln!(
            "{} {}: {:.3e} {cmp} {:.3e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.residual,
            c.tolerance
        );
    }
    if report.passed {
        0
    } else {
        1
    }
}

fn verify(a: VerifyArgs) -> i32 {
    let suites = if a.suites.is_empty() {
        Suite::ALL.to_vec()
    } else {
        match a.suites.iter().map(|s| Suite::parse(s)).collect::<Result<Vec<_>, _>>() {
            Ok(s) => s,
            Err(e) => return fail(&e),
        }
    };
    if !(a.tol_scale > 0.0) {
        return fail(&Error::InvalidParameter(format!("tolerance scale must be positive, got {}", a.tol_scale)));
    }
    let mut opts = VerifyOptions {
        tol_scale: a.tol_scale,
        ..VerifyOptions::default()
    };
    if let Some(s) = a.seed {
        opts.seed = s;
    }
    let start = Instant::now();
    let report = verify_suite(&suites, &opts);
    let elapsed = start.elapsed().as_secs_f64();
    for c in &report.checks {
        let res = c.residual.map(|r| format!("{r:.3e}")).unwrap_or_else(|| "n/a".into());
        let note = c.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default();
        println!("{} {} residual={res} tol={:.3e}{note}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.tolerance);
    }
    println!("{} checks, {} failed, {elapsed:.2} s", report.checks.len(), report.failures);
    if let Some(dir) = a.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        if let Err(e) = std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(dir.join("verify.json"), json + "\n")) {
            return fail(&e.into());
        }
    }
    if report.passed {
        0
    } else {
        1
    }
}
