use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rlboost::experiment::{run_experiment, ExperimentConfig};
use rlboost::verify::{run_verification_suite, Scope};
use rlboost::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_CHECK: u8 = 2;

#[derive(Parser)]
#[command(name = "rlboost", version, about = "Boosting weak policy learners on tabular MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Overrides `boost.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Exit with status 2 unless the final gap is within the configured
        /// fraction of V* and all requested diagnostics pass.
        #[arg(long)]
        check: bool,
        /// Overrides `output_dir`; defaults to `./out`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run a verification suite: all, sampler, smoothing, fw or inequalities.
    Verify {
        scope: Scope,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write `verification.json` here.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn fail(err: &Error) -> ExitCode {
    let kind = match err {
        Error::Config(_) => "config",
        Error::InvalidMdp(_) => "invalid_mdp",
        Error::InvalidPolicy(_) => "invalid_policy",
        Error::OutOfRange { .. } => "out_of_range",
        Error::Contract(_) => "contract",
        Error::Solver(_) => "solver",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
        Error::Csv(_) => "csv",
    };
    let body = serde_json::json!({ "error": kind, "message": err.to_string() });
    eprintln!("{body}");
    ExitCode::from(EXIT_CONFIG)
}

fn run(config: &Path, seed: Option<u64>, check: bool, output_dir: Option<PathBuf>) -> Result<ExitCode, Error> {
    let cfg = ExperimentConfig::load(config)?;
    let seed = seed.unwrap_or(cfg.boost.seed);
    let dir = output_dir
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome = run_experiment(&cfg, seed, &dir)?;
    let r = &outcome.report;
    println!(
        "V = {:.6}  V* = {:.6}  gap = {:.6} ({:.2}%)  episodes = {}  output = {}",
        r.final_value,
        r.v_star,
        r.gap,
        100.0 * r.gap / r.v_star,
        r.episodes_total,
        dir.display()
    );
    if check && !outcome.check_passed {
        eprintln!(
            "check failed: gap {:.6} exceeds {:.4} of V*, or a diagnostic failed",
            r.gap, cfg.check.max_relative_gap
        );
        return Ok(ExitCode::from(EXIT_CHECK));
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(scope: Scope, seed: u64, output_dir: Option<PathBuf>) -> Result<ExitCode, Error> {
    let report = run_verification_suite(scope, seed)?;
    for c in &report.checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        println!("{status}  {:<62} measured {:>12.6e}  bound {:>12.6e}", c.name, c.measured, c.bound);
    }
    if let Some(dir) = output_dir {
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("verification.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            check,
            output_dir,
        } => run(&config, seed, check, output_dir),
        Command::Verify { scope, seed, output_dir } => verify(scope, seed, output_dir),
    };
    result.unwrap_or_else(|e| fail(&e))
}
