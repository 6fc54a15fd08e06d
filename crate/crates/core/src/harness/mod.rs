//! Experiment configuration, deterministic multi-seed execution and artifact
//! emission.
//!
//! Output layout under `<output_dir>/<name>/`:
//! - `run`: `<algorithm>/trace_seed<k>.csv`, `<algorithm>/summary.json`, `<algorithm>/aggregate.csv`
//! - `compare`: the same for both `pi/` and `pg/`, plus `compare.json`.

mod config;
mod output;
mod presets;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{Experiment, ExperimentConfig, PlantSpec, Rows, ScheduleSpec, WeightsSpec, DEFAULT_COMPARE_THRESHOLD};
pub use output::{aggregate, emit_aggregate_csv, emit_summary_json, emit_trace_csv, write_trace_csv, AggregateRow, Envelope, TRACE_COLUMNS};
pub use presets::{expand, InitRule, Preset, PresetSpec};

use crate::bounds::{evaluate, BoundReport};
use crate::error::{Error, Result};
use crate::orls::{orls_pg_run, orls_pi_run, IterateTrace};
use crate::sysid::PersistencyParams;

/// Caps the number of worker threads used for multi-seed runs.
pub const THREADS_ENV: &str = "ORLSPI_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Pi,
    Pg,
}

impl Algorithm {
    pub fn dir_name(self) -> &'static str {
        match self {
            Algorithm::Pi => "pi",
            Algorithm::Pg => "pg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged,
}

/// Per-seed summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub status: RunStatus,
    pub error: Option<String>,
    pub initial_err_p: Option<f64>,
    pub final_err_p: Option<f64>,
    pub final_err_theta: Option<f64>,
    pub final_err_k: Option<f64>,
    pub breakdowns: usize,
    pub d_bar: Option<f64>,
    pub w_sup: Option<f64>,
    pub w_energy: Option<f64>,
    pub persistency: Option<PersistencyParams>,
    pub verdicts: Option<BoundReport>,
    pub wall_clock_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub algorithm: Algorithm,
    pub runs: Vec<RunSummary>,
}

impl ExperimentReport {
    pub fn diverged(&self) -> Vec<u64> {
        self.runs.iter().filter(|r| r.status == RunStatus::Diverged).map(|r| r.seed).collect()
    }
}

/// One seed's outcome: the summary plus the trace when the run completed.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub summary: RunSummary,
    pub trace: Option<IterateTrace>,
}

/// Runs one seed. Divergence is recorded in the summary; any other failure is returned.
pub fn run_seed(exp: &Experiment, seed: u64, algorithm: Algorithm) -> Result<SeedOutcome> {
    let start = Instant::now();
    let cfg = exp.orls_config(seed);
    let schedule = exp.noise(seed)?;
    let result = match algorithm {
        Algorithm::Pi => orls_pi_run(&cfg, &schedule),
        Algorithm::Pg => orls_pg_run(&cfg, &schedule),
    };
    let base = RunSummary {
        seed,
        algorithm,
        horizon: exp.horizon,
        status: RunStatus::Completed,
        error: None,
        initial_err_p: None,
        final_err_p: None,
        final_err_theta: None,
        final_err_k: None,
        breakdowns: 0,
        d_bar: None,
        w_sup: None,
        w_energy: None,
        persistency: None,
        verdicts: None,
        wall_clock_ms: 0.0,
    };
    match result {
        Ok(trace) => {
            let report = evaluate(&trace, exp.search, exp.schedule.is_energy_bounded());
            let first = trace.steps.first();
            let last = trace.steps.last();
            let summary = RunSummary {
                initial_err_p: first.map(|s| s.err_p),
                final_err_p: last.map(|s| s.err_p),
                final_err_theta: last.map(|s| s.err_theta),
                final_err_k: last.map(|s| s.err_k),
                breakdowns: trace.breakdowns,
                d_bar: Some(report.d_bar),
                w_sup: Some(report.w_sup),
                w_energy: Some(report.w_energy),
                persistency: report.persistency,
                verdicts: Some(report),
                wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
                ..base
            };
            Ok(SeedOutcome { summary, trace: Some(trace) })
        }
        Err(e @ Error::Divergence { .. }) => Ok(SeedOutcome {
            summary: RunSummary {
                status: RunStatus::Diverged,
                error: Some(e.to_string()),
                wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
                ..base
            },
            trace: None,
        }),
        Err(e) => Err(e),
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))
}

/// Runs every seed (in parallel), returning outcomes in seed-list order.
pub fn run_seeds(exp: &Experiment, seeds: &[u64], algorithm: Algorithm) -> Result<Vec<SeedOutcome>> {
    let pool = thread_pool()?;
    pool.install(|| seeds.par_iter().map(|&s| run_seed(exp, s, algorithm)).collect())
}

/// First `t` with `err_p ≤ threshold`.
pub fn first_hit(trace: &IterateTrace, threshold: f64) -> Option<usize> {
    trace.steps.iter().find(|s| s.err_p <= threshold).map(|s| s.t)
}

fn experiment_dir(exp: &Experiment, out: Option<&Path>) -> PathBuf {
    out.unwrap_or(&exp.output_dir).join(&exp.name)
}

fn write_outcomes(exp: &Experiment, outcomes: &[SeedOutcome], algorithm: Algorithm, dir: &Path) -> Result<ExperimentReport> {
    for o in outcomes {
        if let Some(trace) = &o.trace {
            emit_trace_csv(trace, &dir.join(format!("trace_seed{}.csv", o.summary.seed)))?;
        }
    }
    let completed: Vec<&IterateTrace> = outcomes.iter().filter_map(|o| o.trace.as_ref()).collect();
    if !completed.is_empty() {
        emit_aggregate_csv(&aggregate(&completed), &dir.join("aggregate.csv"))?;
    }
    let report = ExperimentReport {
        name: exp.name.clone(),
        algorithm,
        runs: outcomes.iter().map(|o| o.summary.clone()).collect(),
    };
    emit_summary_json(&report, &dir.join("summary.json"))?;
    Ok(report)
}

/// Runs the experiment and writes its artifacts. Returns the report and the directory written.
pub fn run_experiment(exp: &Experiment, algorithm: Algorithm, out: Option<&Path>) -> Result<(ExperimentReport, PathBuf)> {
    let dir = experiment_dir(exp, out).join(algorithm.dir_name());
    let outcomes = run_seeds(exp, &exp.seeds, algorithm)?;
    Ok((write_outcomes(exp, &outcomes, algorithm, &dir)?, dir))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub pi_first_hit: Option<usize>,
    pub pg_first_hit: Option<usize>,
    /// True when PI reaches the threshold and PG does not, or PI gets there strictly first.
    pub pi_faster: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub name: String,
    pub threshold: f64,
    pub pg_stepsize: f64,
    pub seeds: Vec<SeedComparison>,
    pub pi_faster_on_all: bool,
    pub pi: ExperimentReport,
    pub pg: ExperimentReport,
}

impl CompareReport {
    pub fn diverged(&self) -> bool {
        !self.pi.diverged().is_empty() || !self.pg.diverged().is_empty()
    }
}

/// PI and PG on matched seeds; first-crossing times of `err_p` below the threshold.
pub fn compare_experiment(exp: &Experiment, out: Option<&Path>) -> Result<(CompareReport, PathBuf)> {
    let pg_stepsize = exp
        .pg_stepsize
        .ok_or_else(|| Error::Config("pg_stepsize: required for compare".into()))?;
    let dir = experiment_dir(exp, out);
    let pi = run_seeds(exp, &exp.seeds, Algorithm::Pi)?;
    let pg = run_seeds(exp, &exp.seeds, Algorithm::Pg)?;
    let threshold = exp.compare_threshold;
    let seeds = pi
        .iter()
        .zip(&pg)
        .map(|(a, b)| {
            let pi_hit = a.trace.as_ref().and_then(|t| first_hit(t, threshold));
            let pg_hit = b.trace.as_ref().and_then(|t| first_hit(t, threshold));
            let pi_faster = match (pi_hit, pg_hit) {
                (Some(x), Some(y)) => x < y,
                (Some(_), None) => true,
                _ => false,
            };
            SeedComparison { seed: a.summary.seed, pi_first_hit: pi_hit, pg_first_hit: pg_hit, pi_faster }
        })
        .collect::<Vec<_>>();
    let report = CompareReport {
        name: exp.name.clone(),
        threshold,
        pg_stepsize,
        pi_faster_on_all: seeds.iter().all(|s| s.pi_faster),
        seeds,
        pi: write_outcomes(exp, &pi, Algorithm::Pi, &dir.join("pi"))?,
        pg: write_outcomes(exp, &pg, Algorithm::Pg, &dir.join("pg"))?,
    };
    emit_summary_json(&report, &dir.join("compare.json"))?;
    Ok((report, dir))
}
