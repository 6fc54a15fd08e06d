//! JSON experiment configuration and its resolution into runnable settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::presets::{expand, InitRule, Preset};
use crate::bounds::PersistencySearch;
use crate::error::{Error, Result};
use crate::lqr::{lqr, CostWeights, Gain, Plant};
use crate::matops::{from_rows, identity, Mat, Vector};
use crate::noise::{parse_schedule_csv, NoiseKind, NoiseSchedule};
use crate::orls::{ExcitationMode, OrlsPiConfig, DEFAULT_STATE_CAP};

pub type Rows = Vec<Vec<f64>>;

/// Default threshold on `err_p` for the convergence-speed comparison.
pub const DEFAULT_COMPARE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    pub q: Rows,
    pub r: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Pb1,
    Pb2,
    Eb,
    None,
    Constant { magnitude: f64 },
    Custom { table: Vec<(u64, f64)> },
    /// Two-column `t,magnitude` file, relative to the config file.
    CustomCsv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub plant: PlantSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0_scale: Option<f64>,
    pub schedule: ScheduleSpec,
    pub horizon: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_excitation")]
    pub excitation: ExcitationMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub off_policy_gain: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dither_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pg_stepsize: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persistency: Option<PersistencySearch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_threshold: Option<f64>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_excitation() -> ExcitationMode {
    ExcitationMode::OnPolicy
}

/// A fully resolved experiment: every matrix built, every default filled in.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub plant: Plant,
    pub weights: CostWeights,
    pub theta0: Mat,
    pub h0_scale: f64,
    pub schedule: NoiseKind,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub excitation: ExcitationMode,
    pub off_policy_gain: Option<Gain>,
    pub dither_bound: f64,
    pub pg_stepsize: Option<f64>,
    pub x0: Vector,
    pub output_dir: PathBuf,
    pub search: PersistencySearch,
    pub state_cap: f64,
    pub compare_threshold: f64,
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Config(format!("{name}: {e}")))
}

impl ExperimentConfig {
    /// Parses a configuration; syntax and type errors carry line and column.
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Builds the experiment. Relative `custom_csv` paths are taken from `base_dir`.
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<Experiment> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("name: must not be empty".into()));
        }
        if self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return Err(Error::Config("name: must be usable as a directory name".into()));
        }
        let preset = self.plant.preset.map(expand);
        let plant = match (&preset, &self.plant.a, &self.plant.b) {
            (Some(p), None, None) => p.plant.clone(),
            (None, Some(a), Some(b)) => field("plant", Plant::new(from_rows(a)?, from_rows(b)?))?,
            (Some(_), _, _) => return Err(Error::Config("plant: give either a preset or inline a/b, not both".into())),
            (None, _, _) => return Err(Error::Config("plant: inline plants need both a and b".into())),
        };
        let (n_x, n_u) = (plant.n_x(), plant.n_u());

        let weights = match (&self.weights, &preset) {
            (Some(w), _) => field("weights", CostWeights::new(from_rows(&w.q)?, from_rows(&w.r)?))?,
            (None, Some(p)) => p.weights.clone(),
            (None, None) => return Err(Error::Config("weights: required for inline plants".into())),
        };
        field("weights", weights.check_dims(&plant))?;

        let init = match (&self.init, &preset) {
            (Some(i), _) => i.clone(),
            (None, Some(p)) => p.init.clone(),
            (None, None) => return Err(Error::Config("init: required for inline plants".into())),
        };
        let theta0 = field("init", init.apply(&plant))?;
        if theta0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("init: initial estimate is not finite".into()));
        }

        let h0_scale = match (self.h0_scale, &preset) {
            (Some(a), _) => a,
            (None, Some(p)) => p.h0_scale,
            (None, None) => return Err(Error::Config("h0_scale: required for inline plants".into())),
        };
        if !(h0_scale > 0.0 && h0_scale.is_finite()) {
            return Err(Error::Config(format!("h0_scale: must be positive and finite, got {h0_scale}")));
        }

        let schedule = match &self.schedule {
            ScheduleSpec::Pb1 => NoiseKind::Pb1,
            ScheduleSpec::Pb2 => NoiseKind::Pb2,
            ScheduleSpec::Eb => NoiseKind::Eb,
            ScheduleSpec::None => NoiseKind::None,
            ScheduleSpec::Constant { magnitude } => NoiseKind::Constant { magnitude: *magnitude },
            ScheduleSpec::Custom { table } => NoiseKind::Custom { table: table.clone() },
            ScheduleSpec::CustomCsv { path } => {
                let full = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let file = std::fs::File::open(&full).map_err(|e| Error::Config(format!("schedule: cannot open {}: {e}", full.display())))?;
                field("schedule", parse_schedule_csv(file))?
            }
        };
        field("schedule", schedule.validate())?;

        if self.horizon < 1 {
            return Err(Error::Config("horizon: must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: must list at least one seed".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds: duplicates are not allowed".into()));
        }

        let off_policy_gain = match &self.off_policy_gain {
            Some(rows) => Some(Gain(field("off_policy_gain", from_rows(rows))?)),
            None => None,
        };
        let dither_bound = self.dither_bound.or(preset.as_ref().map(|p| p.dither_bound)).unwrap_or(0.0);
        let pg_stepsize = self.pg_stepsize.or(preset.as_ref().and_then(|p| p.pg_stepsize));
        let x0 = match &self.x0 {
            Some(v) => Vector::from_vec(v.clone()),
            None => Vector::zeros(n_x),
        };
        let search = self.persistency.unwrap_or_else(|| PersistencySearch::for_dims(n_x, n_u));
        if search.m_interval < 1 || search.n_max < 1 {
            return Err(Error::Config("persistency: m_interval and n_max must be >= 1".into()));
        }
        let state_cap = self.state_cap.unwrap_or(DEFAULT_STATE_CAP);
        if !(state_cap > 0.0) {
            return Err(Error::Config(format!("state_cap: must be positive, got {state_cap}")));
        }
        let compare_threshold = self.compare_threshold.unwrap_or(DEFAULT_COMPARE_THRESHOLD);
        if !(compare_threshold > 0.0 && compare_threshold.is_finite()) {
            return Err(Error::Config(format!("compare_threshold: must be positive and finite, got {compare_threshold}")));
        }

        let exp = Experiment {
            name: self.name.clone(),
            plant,
            weights,
            theta0,
            h0_scale,
            schedule,
            horizon: self.horizon,
            seeds: self.seeds.clone(),
            excitation: self.excitation,
            off_policy_gain,
            dither_bound,
            pg_stepsize,
            x0,
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            search,
            state_cap,
            compare_threshold,
        };
        field("config", exp.orls_config(exp.seeds[0]).validate())?;
        Ok(exp)
    }
}

impl Experiment {
    pub fn orls_config(&self, seed: u64) -> OrlsPiConfig {
        let dim = self.theta0.ncols();
        OrlsPiConfig {
            true_plant: self.plant.clone(),
            weights: self.weights.clone(),
            theta0: self.theta0.clone(),
            h0: identity(dim) * self.h0_scale,
            x0: self.x0.clone(),
            dither_bound: self.dither_bound,
            excitation: self.excitation,
            off_policy_gain: self.off_policy_gain.clone(),
            initial_gain: None,
            horizon: self.horizon,
            seed,
            pg_stepsize: self.pg_stepsize,
            state_cap: self.state_cap,
        }
    }

    pub fn noise(&self, seed: u64) -> Result<NoiseSchedule> {
        NoiseSchedule::new(self.schedule.clone(), self.plant.n_x(), seed)
    }

    /// Checks that the experiment is well posed: the true plant has an LQR
    /// solution and so does the initial estimate (which supplies `K̂₁`).
    pub fn check_integrity(&self) -> Result<()> {
        lqr(&self.plant, &self.weights).map_err(|e| Error::Config(format!("plant: no LQR solution for the true plant: {e}")))?;
        let est = Plant::from_theta(&self.theta0, self.plant.n_x())?;
        lqr(&est, &self.weights).map_err(|e| Error::Config(format!("init: no LQR solution for the initial estimate: {e}")))?;
        Ok(())
    }
}
