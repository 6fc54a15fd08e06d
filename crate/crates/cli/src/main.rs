//! `orlspi`: run, validate and compare ORLS+PI / ORLS+PG experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 divergence or output failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use orlspi_core::bounds::{Status, Verdict};
use orlspi_core::harness::{compare_experiment, run_experiment, Algorithm, Experiment, ExperimentConfig, RunSummary};
use orlspi_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUN: u8 = 3;

#[derive(Parser)]
#[command(name = "orlspi", version, about = "Online RLS + policy iteration experiments for LQR")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write traces, summary and aggregate.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output root; overrides the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds; overrides the config's seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, value_enum, default_value_t = AlgorithmArg::Pi)]
        algorithm: AlgorithmArg,
    },
    /// Check a config against the schema and that its plant and initial estimate are well posed.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run PI and PG on matched seeds and report first crossings of the err_p threshold.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Pi,
    Pg,
}

struct Failure {
    code: u8,
    message: String,
}

fn config_failure(e: Error) -> Failure {
    Failure { code: EXIT_CONFIG, message: format!("config error: {e}") }
}

fn run_failure(e: Error) -> Failure {
    Failure { code: EXIT_RUN, message: format!("run failed: {e}") }
}

fn load(path: &Path, seeds: Option<Vec<u64>>) -> Result<Experiment, Failure> {
    let mut cfg = ExperimentConfig::load(path).map_err(config_failure)?;
    if let Some(seeds) = seeds {
        cfg.seeds = seeds;
    }
    let exp = cfg.resolve(path.parent()).map_err(config_failure)?;
    exp.check_integrity().map_err(config_failure)?;
    Ok(exp)
}

fn verdict_tag(v: &Verdict) -> &'static str {
    match v.status {
        Status::Pass => "pass",
        Status::Fail => "FAIL",
        Status::NotApplicable => "n/a",
    }
}

fn print_run(r: &RunSummary) {
    match (&r.verdicts, r.final_err_p) {
        (Some(v), Some(err_p)) => println!(
            "  seed {:>4}: err_p {:.3e} -> {:.3e}, err_theta {:.3e}, breakdowns {}, bounds: rls {} / energy {} / growth {}",
            r.seed,
            r.initial_err_p.unwrap_or(f64::NAN),
            err_p,
            r.final_err_theta.unwrap_or(f64::NAN),
            r.breakdowns,
            verdict_tag(&v.rls_pointwise),
            verdict_tag(&v.rls_energy),
            verdict_tag(&v.lambda_min_growth),
        ),
        _ => println!("  seed {:>4}: {}", r.seed, r.error.as_deref().unwrap_or("no result")),
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { config } => {
            let exp = load(&config, None)?;
            println!(
                "{}: ok ({} states, {} inputs, horizon {}, {} seed(s))",
                exp.name,
                exp.plant.n_x(),
                exp.plant.n_u(),
                exp.horizon,
                exp.seeds.len()
            );
            Ok(())
        }
        Command::Run { config, out, seeds, algorithm } => {
            let exp = load(&config, seeds)?;
            let algorithm = match algorithm {
                AlgorithmArg::Pi => Algorithm::Pi,
                AlgorithmArg::Pg => Algorithm::Pg,
            };
            let (report, dir) = run_experiment(&exp, algorithm, out.as_deref()).map_err(run_failure)?;
            println!("{} ({:?}): wrote {}", report.name, algorithm, dir.display());
            report.runs.iter().for_each(print_run);
            let diverged = report.diverged();
            if diverged.is_empty() {
                Ok(())
            } else {
                Err(Failure { code: EXIT_RUN, message: format!("diverged on seed(s) {diverged:?}") })
            }
        }
        Command::Compare { config, out, seeds } => {
            let exp = load(&config, seeds)?;
            let (report, dir) = compare_experiment(&exp, out.as_deref()).map_err(|e| match e {
                e @ Error::Config(_) => config_failure(e),
                e => run_failure(e),
            })?;
            println!("{}: wrote {}", report.name, dir.display());
            println!("  first step with err_p <= {:e} (PG stepsize {}):", report.threshold, report.pg_stepsize);
            let show = |v: Option<usize>| v.map_or("never".to_string(), |t| t.to_string());
            for s in &report.seeds {
                println!(
                    "  seed {:>4}: PI {:>6}  PG {:>6}  {}",
                    s.seed,
                    show(s.pi_first_hit),
                    show(s.pg_first_hit),
                    if s.pi_faster { "PI faster" } else { "PI not faster" }
                );
            }
            println!("  PI faster on every seed: {}", report.pi_faster_on_all);
            if report.diverged() {
                Err(Failure { code: EXIT_RUN, message: "at least one run diverged".into() })
            } else {
                Ok(())
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("orlspi: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
