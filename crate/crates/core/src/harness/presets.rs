//! The two reference setups: a slightly unstable, weakly coupled 3-state
//! plant with full actuation, and a 3-state/2-input plant used for the
//! PI-versus-PG comparison.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lqr::{CostWeights, Plant};
use crate::matops::{from_rows, identity, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[serde(rename = "paper_5_1")]
    Benchmark,
    #[serde(rename = "paper_5_2")]
    TwoInput,
}

/// How the initial estimate `θ̂₀` is derived from the true plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitRule {
    /// `Â₀ = A + a_offset·I`, `B̂₀ = B + b_offset·I` (identity of B's shape).
    Additive { a_offset: f64, b_offset: f64 },
    /// `Â₀ = a_factor·A`, `B̂₀ = b_factor·B`.
    Multiplicative { a_factor: f64, b_factor: f64 },
    /// Given outright.
    Explicit { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
}

impl InitRule {
    pub fn apply(&self, plant: &Plant) -> Result<Mat> {
        let est = match self {
            InitRule::Additive { a_offset, b_offset } => Plant::new(
                &plant.a + identity(plant.n_x()) * *a_offset,
                &plant.b + Mat::identity(plant.n_x(), plant.n_u()) * *b_offset,
            )?,
            InitRule::Multiplicative { a_factor, b_factor } => Plant::new(&plant.a * *a_factor, &plant.b * *b_factor)?,
            InitRule::Explicit { a, b } => Plant::new(from_rows(a)?, from_rows(b)?)?,
        };
        if est.a.shape() != plant.a.shape() || est.b.shape() != plant.b.shape() {
            return Err(crate::Error::Dimension("initial estimate does not match the plant's dimensions".into()));
        }
        Ok(est.theta())
    }
}

/// Everything a preset pins down.
#[derive(Debug, Clone)]
pub struct PresetSpec {
    pub plant: Plant,
    pub weights: CostWeights,
    pub init: InitRule,
    pub h0_scale: f64,
    pub dither_bound: f64,
    pub pg_stepsize: Option<f64>,
}

pub fn expand(preset: Preset) -> PresetSpec {
    match preset {
        Preset::Benchmark => benchmark(),
        Preset::TwoInput => two_input(),
    }
}

fn rows(r: &[&[f64]]) -> Mat {
    from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).expect("preset tables are well formed")
}

fn benchmark() -> PresetSpec {
    let a = rows(&[&[1.01, 0.01, 0.0], &[0.01, 1.01, 0.01], &[0.0, 0.01, 1.01]]);
    PresetSpec {
        plant: Plant::new(a, identity(3)).expect("valid plant"),
        weights: CostWeights::new(identity(3) * 0.001, identity(3)).expect("valid weights"),
        init: InitRule::Additive { a_offset: 0.5, b_offset: 0.5 },
        h0_scale: 0.1,
        dither_bound: 10.0,
        pg_stepsize: None,
    }
}

fn two_input() -> PresetSpec {
    let a = rows(&[&[-0.53, 0.42, -0.44], &[0.42, -0.56, -0.65], &[-0.44, -0.65, 0.35]]);
    let b = rows(&[&[0.43, -0.82], &[0.53, -0.78], &[0.26, -0.40]]);
    let q = rows(&[&[6.12, 1.72, 0.53], &[1.72, 6.86, 1.72], &[0.53, 1.72, 5.73]]);
    let r = rows(&[&[1.15, -0.23], &[-0.23, 3.62]]);
    PresetSpec {
        plant: Plant::new(a, b).expect("valid plant"),
        weights: CostWeights::new(q, r).expect("valid weights"),
        init: InitRule::Multiplicative { a_factor: 1.3, b_factor: 0.7 },
        h0_scale: 0.01,
        dither_bound: 10.0,
        pg_stepsize: Some(0.005),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_entries(m: &Mat, expected: &[&[f64]]) {
        assert_eq!(m.nrows(), expected.len());
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(m.ncols(), row.len());
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(m[(i, j)], v, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn benchmark_preset_entries() {
        let s = expand(Preset::Benchmark);
        assert_entries(&s.plant.a, &[&[1.01, 0.01, 0.0], &[0.01, 1.01, 0.01], &[0.0, 0.01, 1.01]]);
        assert_entries(&s.plant.b, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert_entries(&s.weights.q, &[&[0.001, 0.0, 0.0], &[0.0, 0.001, 0.0], &[0.0, 0.0, 0.001]]);
        assert_entries(&s.weights.r, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let theta0 = s.init.apply(&s.plant).unwrap();
        assert_entries(
            &theta0,
            &[
                &[1.51, 0.01, 0.0, 1.5, 0.0, 0.0],
                &[0.01, 1.51, 0.01, 0.0, 1.5, 0.0],
                &[0.0, 0.01, 1.51, 0.0, 0.0, 1.5],
            ],
        );
        assert_eq!(s.h0_scale, 0.1);
        assert_eq!(s.dither_bound, 10.0);
        assert_eq!(s.pg_stepsize, None);
    }

    #[test]
    fn two_input_preset_entries() {
        let s = expand(Preset::TwoInput);
        assert_entries(&s.plant.a, &[&[-0.53, 0.42, -0.44], &[0.42, -0.56, -0.65], &[-0.44, -0.65, 0.35]]);
        assert_entries(&s.plant.b, &[&[0.43, -0.82], &[0.53, -0.78], &[0.26, -0.40]]);
        assert_entries(&s.weights.q, &[&[6.12, 1.72, 0.53], &[1.72, 6.86, 1.72], &[0.53, 1.72, 5.73]]);
        assert_entries(&s.weights.r, &[&[1.15, -0.23], &[-0.23, 3.62]]);
        let theta0 = s.init.apply(&s.plant).unwrap();
        assert_eq!(theta0.columns(0, 3).into_owned(), &s.plant.a * 1.3);
        assert_eq!(theta0.columns(3, 2).into_owned(), &s.plant.b * 0.7);
        assert_eq!(s.h0_scale, 0.01);
        assert_eq!(s.dither_bound, 10.0);
        assert_eq!(s.pg_stepsize, Some(0.005));
    }
}
