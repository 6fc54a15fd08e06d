//! Adversarial process-noise schedules.
//!
//! A schedule fixes the magnitude `|w_t|` for every `t ≥ 1`; the direction is
//! drawn uniformly on the unit sphere from a stream keyed by `(seed, t)`.

use std::io::Read;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::Vector;
use crate::rng::{stream_rng, DOMAIN_NOISE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    /// `0.5/t + 0.5`
    Pb1,
    /// `0.5/t`
    Pb2,
    /// `0.5/t²`
    Eb,
    /// Zero noise; convenient for noise-free reference runs.
    None,
    Constant { magnitude: f64 },
    /// Piecewise-constant table: the magnitude at `t` is the entry with the
    /// largest `t_k ≤ t`, zero before the first entry.
    Custom { table: Vec<(u64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub kind: NoiseKind,
    pub dim: usize,
    pub seed: u64,
}

impl NoiseKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseKind::Constant { magnitude } if !(magnitude.is_finite() && *magnitude >= 0.0) => {
                Err(Error::Config(format!("constant noise magnitude must be finite and >= 0, got {magnitude}")))
            }
            NoiseKind::Custom { table } => validate_table(table),
            _ => Ok(()),
        }
    }

    /// True for schedules whose magnitudes are summable.
    pub fn is_energy_bounded(&self) -> bool {
        matches!(self, NoiseKind::Eb | NoiseKind::None)
    }
}

fn validate_table(table: &[(u64, f64)]) -> Result<()> {
    if table.is_empty() {
        return Err(Error::Config("custom noise table is empty".into()));
    }
    for (i, &(t, m)) in table.iter().enumerate() {
        if t < 1 {
            return Err(Error::Config(format!("custom noise row {}: t must be >= 1", i + 1)));
        }
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::Config(format!("custom noise row {}: magnitude must be finite and >= 0", i + 1)));
        }
        if i > 0 && table[i - 1].0 >= t {
            return Err(Error::Config(format!("custom noise row {}: t must be strictly increasing", i + 1)));
        }
    }
    Ok(())
}

impl NoiseSchedule {
    pub fn new(kind: NoiseKind, dim: usize, seed: u64) -> Result<Self> {
        kind.validate()?;
        if dim == 0 {
            return Err(Error::Dimension("noise dimension must be positive".into()));
        }
        Ok(NoiseSchedule { kind, dim, seed })
    }

    pub fn magnitude_at(&self, t: u64) -> Result<f64> {
        magnitude_at(&self.kind, t)
    }

    pub fn sample(&self, t: u64) -> Result<Vector> {
        let mag = self.magnitude_at(t)?;
        Ok(unit_direction(self.dim, self.seed, t) * mag)
    }

    /// Noise for `t = 1..=horizon`.
    pub fn trace(&self, horizon: u64) -> Result<Vec<Vector>> {
        (1..=horizon).map(|t| self.sample(t)).collect()
    }
}

pub fn magnitude_at(kind: &NoiseKind, t: u64) -> Result<f64> {
    if t < 1 {
        return Err(Error::Domain("noise schedules are defined for t >= 1".into()));
    }
    let tf = t as f64;
    Ok(match kind {
        NoiseKind::Pb1 => 0.5 / tf + 0.5,
        NoiseKind::Pb2 => 0.5 / tf,
        NoiseKind::Eb => 0.5 / (tf * tf),
        NoiseKind::None => 0.0,
        NoiseKind::Constant { magnitude } => *magnitude,
        NoiseKind::Custom { table } => match table.partition_point(|&(tk, _)| tk <= t) {
            0 => 0.0,
            i => table[i - 1].1,
        },
    })
}

/// Uniform direction on the unit sphere in `dim` dimensions.
fn unit_direction(dim: usize, seed: u64, t: u64) -> Vector {
    let mut rng = stream_rng(seed, DOMAIN_NOISE, t);
    loop {
        let v = Vector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// `sup_t |w_t|`.
pub fn sup_norm(trace: &[Vector]) -> f64 {
    trace.iter().map(|w| w.norm()).fold(0.0, f64::max)
}

/// `Σ_t |w_t|` (sum of Euclidean norms over the realized trace).
pub fn energy_norm(trace: &[Vector]) -> f64 {
    trace.iter().map(|w| w.norm()).sum()
}

/// Reads a two-column `t,magnitude` table. A header row is optional; blank
/// lines and `#` comments are ignored.
pub fn parse_schedule_csv<R: Read>(reader: R) -> Result<NoiseKind> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut table = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Config(format!("noise table line {line}: {e}")))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::Config(format!("noise table line {line}: expected 2 columns, found {}", rec.len())));
        }
        let t = rec[0].parse::<u64>();
        let m = rec[1].parse::<f64>();
        match (t, m) {
            (Ok(t), Ok(m)) => table.push((t, m)),
            _ if i == 0 => continue, // header
            _ => return Err(Error::Config(format!("noise table line {line}: cannot parse '{}', '{}'", &rec[0], &rec[1]))),
        }
    }
    let kind = NoiseKind::Custom { table };
    kind.validate()?;
    Ok(kind)
}
