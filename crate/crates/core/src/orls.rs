//! Online RLS identification coupled with certainty-equivalent policy
//! iteration (ORLS+PI), plus the policy-gradient variant (ORLS+PG) used as a
//! baseline.
//!
//! Per timestep `t ≥ 1`:
//! 1. `P̂_t` evaluates `K̂_t` on the previous estimate `θ̂_{t−1}`;
//! 2. the true plant is driven with `u_t = K x_t + e_t`;
//! 3. RLS absorbs `(d_t, x_{t+1})` to produce `θ̂_t`;
//! 4. the gain is improved on `θ̂_t` (greedy for PI, one gradient step for PG).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lqr::{lqr, policy_evaluation, policy_improvement, CostWeights, Gain, Plant, ValueKernel};
use crate::matops::{min_eigenvalue_sym, Mat, Vector};
use crate::noise::NoiseSchedule;
use crate::rng::{stream_rng, DOMAIN_DITHER};
use crate::sysid::{rls_update, RlsState};

pub const DEFAULT_STATE_CAP: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationMode {
    /// Data generated with the gain being learned.
    OnPolicy,
    /// Data generated with a fixed gain.
    OffPolicy,
}

#[derive(Debug, Clone)]
pub struct OrlsPiConfig {
    /// Used only by the simulator and for error reporting.
    pub true_plant: Plant,
    pub weights: CostWeights,
    /// `θ̂₀ = [Â₀ B̂₀]`
    pub theta0: Mat,
    pub h0: Mat,
    pub x0: Vector,
    pub dither_bound: f64,
    pub excitation: ExcitationMode,
    /// Gain used for off-policy excitation; defaults to the LQR gain of the initial estimate.
    pub off_policy_gain: Option<Gain>,
    /// Overrides `K̂₁`, which otherwise is the LQR gain of the initial estimate.
    pub initial_gain: Option<Gain>,
    pub horizon: usize,
    pub seed: u64,
    pub pg_stepsize: Option<f64>,
    pub state_cap: f64,
}

impl OrlsPiConfig {
    pub fn validate(&self) -> Result<()> {
        let (n_x, n_u) = (self.true_plant.n_x(), self.true_plant.n_u());
        self.weights.check_dims(&self.true_plant)?;
        if self.theta0.shape() != (n_x, n_x + n_u) {
            return Err(Error::Dimension(format!(
                "theta0 is {}x{}, expected {n_x}x{}",
                self.theta0.nrows(),
                self.theta0.ncols(),
                n_x + n_u
            )));
        }
        if self.h0.shape() != (n_x + n_u, n_x + n_u) {
            return Err(Error::Dimension(format!("H0 must be {0}x{0}", n_x + n_u)));
        }
        if self.x0.len() != n_x {
            return Err(Error::Dimension(format!("x0 has length {}, expected {n_x}", self.x0.len())));
        }
        if !(self.dither_bound >= 0.0 && self.dither_bound.is_finite()) {
            return Err(Error::Config(format!("dither bound must be finite and >= 0, got {}", self.dither_bound)));
        }
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if let Some(g) = self.pg_stepsize {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("policy-gradient stepsize must be finite and >= 0, got {g}")));
            }
        }
        for (name, k) in [("off_policy_gain", &self.off_policy_gain), ("initial_gain", &self.initial_gain)] {
            if let Some(k) = k {
                if k.0.shape() != (n_u, n_x) {
                    return Err(Error::Dimension(format!("{name} must be {n_u}x{n_x}")));
                }
            }
        }
        Ok(())
    }
}

/// Everything recorded at one timestep.
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub t: usize,
    pub x: Vector,
    pub u: Vector,
    pub e: Vector,
    pub w: Vector,
    pub d: Vector,
    pub x_next: Vector,
    /// `θ̂_t`, after absorbing `(d_t, x_{t+1})`.
    pub theta_hat: Mat,
    /// `P̂_t`, evaluated on `θ̂_{t−1}`.
    pub p_hat: ValueKernel,
    /// `K̂_t`, the learned gain in force at `t`.
    pub k_hat: Gain,
    /// The gain actually applied to the plant (differs from `k_hat` off-policy).
    pub k_applied: Gain,
    pub err_theta: f64,
    pub err_p: f64,
    pub err_k: f64,
    pub lambda_min_h: f64,
    pub breakdown: bool,
}

#[derive(Debug, Clone)]
pub struct IterateTrace {
    pub steps: Vec<TraceStep>,
    pub breakdowns: usize,
    pub theta_true: Mat,
    pub theta0: Mat,
    pub h0: Mat,
    pub p_star: ValueKernel,
    pub k_star: Gain,
    pub initial_gain: Gain,
}

impl IterateTrace {
    pub fn noise(&self) -> Vec<Vector> {
        self.steps.iter().map(|s| s.w.clone()).collect()
    }

    pub fn regressors(&self) -> Vec<Vector> {
        self.steps.iter().map(|s| s.d.clone()).collect()
    }
}

/// Kernel of `K̂` on the estimated model `θ̂ = [Â B̂]`.
pub fn ce_policy_evaluation(theta_hat: &Mat, w: &CostWeights, k_hat: &Gain) -> Result<ValueKernel> {
    let est = Plant::from_theta(theta_hat, w.q.nrows())?;
    policy_evaluation(&est, w, k_hat).map_err(|e| match e {
        Error::NotStabilizing { rho } => Error::CertaintyEquivalence { rho },
        other => other,
    })
}

pub fn excitation_input(mode: ExcitationMode, k_hat: &Gain, k_fixed: Option<&Gain>, x: &Vector, e: &Vector) -> Result<Vector> {
    let k = match mode {
        ExcitationMode::OnPolicy => k_hat,
        ExcitationMode::OffPolicy => k_fixed.ok_or_else(|| Error::Config("off-policy excitation needs a fixed gain".into()))?,
    };
    if k.0.ncols() != x.len() || e.len() != k.0.nrows() {
        return Err(Error::Dimension("excitation_input: gain, state and dither disagree".into()));
    }
    Ok(&k.0 * x + e)
}

/// Entries i.i.d. uniform on `[−ē, ē]`, addressed by `(seed, t)`.
pub fn dither_sample(seed: u64, e_bar: f64, n_u: usize, t: usize) -> Vector {
    if e_bar == 0.0 {
        return Vector::zeros(n_u);
    }
    let mut rng = stream_rng(seed, DOMAIN_DITHER, t as u64);
    Vector::from_fn(n_u, |_, _| rng.random_range(-e_bar..=e_bar))
}

#[derive(Debug, Clone, Copy)]
enum GainUpdate {
    PolicyIteration,
    PolicyGradient(f64),
}

pub fn orls_pi_run(cfg: &OrlsPiConfig, schedule: &NoiseSchedule) -> Result<IterateTrace> {
    run_loop(cfg, schedule, GainUpdate::PolicyIteration)
}

pub fn orls_pg_run(cfg: &OrlsPiConfig, schedule: &NoiseSchedule) -> Result<IterateTrace> {
    let step = cfg
        .pg_stepsize
        .ok_or_else(|| Error::Config("policy-gradient run needs pg_stepsize".into()))?;
    run_loop(cfg, schedule, GainUpdate::PolicyGradient(step))
}

/// `∇_K` direction of the certainty-equivalent cost: `(R + B̂ᵀP̂B̂)K + B̂ᵀP̂Â`, times 2.
pub fn pg_direction(est: &Plant, w: &CostWeights, p: &ValueKernel, k: &Gain) -> Mat {
    let btp = est.b.transpose() * &p.0;
    ((&w.r + &btp * &est.b) * &k.0 + &btp * &est.a) * 2.0
}

fn run_loop(cfg: &OrlsPiConfig, schedule: &NoiseSchedule, update: GainUpdate) -> Result<IterateTrace> {
    cfg.validate()?;
    let plant = &cfg.true_plant;
    let w = &cfg.weights;
    let (n_x, n_u) = (plant.n_x(), plant.n_u());
    if schedule.dim != n_x {
        return Err(Error::Dimension(format!("noise dimension {} does not match n_x={n_x}", schedule.dim)));
    }
    let theta_true = plant.theta();
    let (p_star, k_star) = lqr(plant, w)?;

    let initial_estimate = Plant::from_theta(&cfg.theta0, n_x)?;
    let estimate_gain = || -> Result<Gain> {
        lqr(&initial_estimate, w)
            .map(|(_, k)| k)
            .map_err(|e| Error::Config(format!("initial estimate admits no LQR solution: {e}")))
    };
    let initial_gain = match &cfg.initial_gain {
        Some(k) => k.clone(),
        None => estimate_gain()?,
    };
    let k_fixed = match (cfg.excitation, &cfg.off_policy_gain) {
        (ExcitationMode::OffPolicy, Some(k)) => Some(k.clone()),
        (ExcitationMode::OffPolicy, None) => Some(estimate_gain()?),
        (ExcitationMode::OnPolicy, _) => None,
    };

    let mut rls = RlsState::with_h0(cfg.theta0.clone(), cfg.h0.clone())?;
    let mut k_hat = initial_gain.clone();
    let mut last_p = ValueKernel(w.q.clone());
    let mut x = cfg.x0.clone();
    let mut steps = Vec::with_capacity(cfg.horizon);
    let mut breakdowns = 0;

    for t in 1..=cfg.horizon {
        let (p_hat, breakdown) = match ce_policy_evaluation(&rls.theta_hat, w, &k_hat) {
            Ok(p) => (p, false),
            Err(Error::CertaintyEquivalence { .. }) => {
                // re-anchor on the current estimate's own optimum
                let est = Plant::from_theta(&rls.theta_hat, n_x)?;
                match lqr(&est, w) {
                    Ok((p, k)) => {
                        k_hat = k;
                        (p, true)
                    }
                    Err(_) => (last_p.clone(), true),
                }
            }
            Err(e) => return Err(e),
        };
        breakdowns += usize::from(breakdown);

        let e = dither_sample(cfg.seed, cfg.dither_bound, n_u, t);
        let u = excitation_input(cfg.excitation, &k_hat, k_fixed.as_ref(), &x, &e)?;
        let noise = schedule.sample(t as u64)?;
        let x_next = &plant.a * &x + &plant.b * &u + &noise;

        let mut d = Vector::zeros(n_x + n_u);
        d.rows_mut(0, n_x).copy_from(&x);
        d.rows_mut(n_x, n_u).copy_from(&u);
        rls = rls_update(&rls, &d, &x_next)?;

        let est = Plant::from_theta(&rls.theta_hat, n_x)?;
        let k_next = match update {
            GainUpdate::PolicyIteration => policy_improvement(&est, w, &p_hat)?,
            GainUpdate::PolicyGradient(step) => Gain(&k_hat.0 - pg_direction(&est, w, &p_hat, &k_hat) * step),
        };

        let k_applied = match cfg.excitation {
            ExcitationMode::OnPolicy => k_hat.clone(),
            ExcitationMode::OffPolicy => k_fixed.clone().expect("off-policy gain resolved above"),
        };
        steps.push(TraceStep {
            t,
            err_theta: (&rls.theta_hat - &theta_true).norm(),
            err_p: (&p_hat.0 - &p_star.0).norm(),
            err_k: (&k_hat.0 - &k_star.0).norm(),
            lambda_min_h: min_eigenvalue_sym(&rls.h),
            x: x.clone(),
            u,
            e,
            w: noise,
            d,
            x_next: x_next.clone(),
            theta_hat: rls.theta_hat.clone(),
            p_hat: p_hat.clone(),
            k_hat: k_hat.clone(),
            k_applied,
            breakdown,
        });

        let norm = x_next.norm();
        if !(norm <= cfg.state_cap) {
            return Err(Error::Divergence { t, norm, cap: cfg.state_cap });
        }
        x = x_next;
        k_hat = k_next;
        last_p = p_hat;
    }

    Ok(IterateTrace {
        steps,
        breakdowns,
        theta_true,
        theta0: cfg.theta0.clone(),
        h0: cfg.h0.clone(),
        p_star,
        k_star,
        initial_gain,
    })
}

/// State bound `max{ (|B|ē + ‖w‖∞)/(1 − K̄_cl), |x₀| }` for a closed-loop
/// contraction level `K̄_cl < 1`.
pub fn state_bound(b_norm: f64, e_bar: f64, w_sup: f64, k_cl_bar: f64, x0_norm: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k_cl_bar) {
        return Err(Error::Domain(format!("closed-loop bound must lie in [0, 1), got {k_cl_bar}")));
    }
    Ok(((b_norm * e_bar + w_sup) / (1.0 - k_cl_bar)).max(x0_norm))
}

/// Data bound `D̄ = (1 + K̄) x̄ + ē`.
pub fn data_bound(k_bar: f64, x_bar: f64, e_bar: f64) -> f64 {
    (1.0 + k_bar) * x_bar + e_bar
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lqr::model_based_pi;
    use crate::matops::{from_rows, identity};
    use crate::noise::NoiseKind;

    fn scalar(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    fn scalar_config() -> OrlsPiConfig {
        let plant = Plant::new(scalar(0.9), scalar(1.0)).unwrap();
        OrlsPiConfig {
            theta0: plant.theta() * 1.2,
            true_plant: plant,
            weights: CostWeights::new(scalar(1.0), scalar(1.0)).unwrap(),
            h0: identity(2) * 0.1,
            x0: Vector::from_element(1, 1.0),
            dither_bound: 1.0,
            excitation: ExcitationMode::OnPolicy,
            off_policy_gain: None,
            initial_gain: None,
            horizon: 50,
            seed: 3,
            pg_stepsize: Some(0.01),
            state_cap: DEFAULT_STATE_CAP,
        }
    }

    #[test]
    fn ce_evaluation_examples() {
        let w = CostWeights::new(scalar(1.0), scalar(1.0)).unwrap();
        let theta = from_rows(&[vec![0.6, 1.0]]).unwrap();
        let p = ce_policy_evaluation(&theta, &w, &Gain(scalar(-0.3))).unwrap();
        assert!((p.0[(0, 0)] - 1.09 / 0.91).abs() < 1e-12);
        let p = ce_policy_evaluation(&theta, &w, &Gain(scalar(-0.6))).unwrap();
        assert!((p.0[(0, 0)] - 1.36).abs() < 1e-12);
        assert!(matches!(
            ce_policy_evaluation(&theta, &w, &Gain(scalar(1.0))),
            Err(Error::CertaintyEquivalence { .. })
        ));
        let plant = Plant::from_theta(&theta, 1).unwrap();
        let direct = policy_evaluation(&plant, &w, &Gain(scalar(-0.3))).unwrap();
        assert_eq!(direct, ce_policy_evaluation(&theta, &w, &Gain(scalar(-0.3))).unwrap());
    }

    #[test]
    fn excitation_examples() {
        let x = Vector::from_element(1, 2.0);
        let e = Vector::from_element(1, 0.1);
        let u = excitation_input(ExcitationMode::OnPolicy, &Gain(scalar(-0.25)), None, &x, &e).unwrap();
        assert!((u[0] + 0.4).abs() < 1e-15);
        let zero = excitation_input(ExcitationMode::OnPolicy, &Gain(scalar(-0.25)), None, &Vector::zeros(1), &Vector::zeros(1)).unwrap();
        assert_eq!(zero[0], 0.0);
        let a = excitation_input(ExcitationMode::OffPolicy, &Gain(scalar(-0.25)), Some(&Gain(scalar(0.5))), &x, &e).unwrap();
        let b = excitation_input(ExcitationMode::OffPolicy, &Gain(scalar(9.0)), Some(&Gain(scalar(0.5))), &x, &e).unwrap();
        let c = excitation_input(ExcitationMode::OffPolicy, &Gain(scalar(9.0)), Some(&Gain(scalar(-1.0))), &x, &e).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(excitation_input(ExcitationMode::OffPolicy, &Gain(scalar(0.0)), None, &x, &e).is_err());
    }

    #[test]
    fn dither_examples() {
        assert_eq!(dither_sample(1, 0.0, 3, 5), Vector::zeros(3));
        for t in 1..500 {
            let e = dither_sample(7, 10.0, 3, t);
            assert!(e.iter().all(|v| (-10.0..=10.0).contains(v)));
            assert!(e.norm() <= 10.0 * 3f64.sqrt());
            assert_eq!(e, dither_sample(7, 10.0, 3, t));
        }
        assert_ne!(dither_sample(7, 10.0, 3, 1), dither_sample(8, 10.0, 3, 1));
    }

    #[test]
    fn noise_free_exact_model_reduces_to_model_based_pi() {
        let mut cfg = scalar_config();
        cfg.theta0 = cfg.true_plant.theta();
        cfg.initial_gain = Some(Gain(scalar(-0.1)));
        let schedule = NoiseSchedule::new(NoiseKind::None, 1, 0).unwrap();
        let trace = orls_pi_run(&cfg, &schedule).unwrap();
        let reference = model_based_pi(&cfg.true_plant, &cfg.weights, &Gain(scalar(-0.1)), cfg.horizon).unwrap();
        for (step, it) in trace.steps.iter().zip(&reference) {
            assert!(step.err_theta < 1e-12);
            assert!((&step.p_hat.0 - &it.p.0).norm() < 1e-9);
        }
        assert_eq!(trace.breakdowns, 0);
    }

    #[test]
    fn pg_with_zero_step_keeps_gain() {
        let mut cfg = scalar_config();
        cfg.pg_stepsize = Some(0.0);
        let schedule = NoiseSchedule::new(NoiseKind::Pb2, 1, 1).unwrap();
        let trace = orls_pg_run(&cfg, &schedule).unwrap();
        let k0 = trace.steps[0].k_hat.clone();
        assert!(trace.steps.iter().all(|s| s.k_hat == k0 || s.breakdown));
        cfg.pg_stepsize = None;
        assert!(orls_pg_run(&cfg, &schedule).is_err());
    }

    #[test]
    fn pg_direction_vanishes_at_pi_fixed_point() {
        let plant = Plant::new(scalar(0.7), scalar(0.5)).unwrap();
        let w = CostWeights::new(scalar(2.0), scalar(1.0)).unwrap();
        let (p, k) = lqr(&plant, &w).unwrap();
        assert!(pg_direction(&plant, &w, &p, &k).norm() < 1e-10);
    }

    #[test]
    fn run_is_deterministic_and_complete() {
        let cfg = scalar_config();
        let schedule = NoiseSchedule::new(NoiseKind::Pb1, 1, 11).unwrap();
        let a = orls_pi_run(&cfg, &schedule).unwrap();
        let b = orls_pi_run(&cfg, &schedule).unwrap();
        assert_eq!(a.steps.len(), cfg.horizon);
        for (sa, sb) in a.steps.iter().zip(&b.steps) {
            assert_eq!(sa.x, sb.x);
            assert_eq!(sa.err_p.to_bits(), sb.err_p.to_bits());
        }
        for (i, s) in a.steps.iter().enumerate() {
            assert_eq!(s.t, i + 1);
            assert!(s.err_p >= 0.0 && s.err_theta >= 0.0 && s.err_k >= 0.0);
            assert_eq!(s.d.len(), 2);
        }
    }

    #[test]
    fn divergence_aborts() {
        let mut cfg = scalar_config();
        cfg.true_plant = Plant::new(scalar(3.0), scalar(1.0)).unwrap();
        cfg.excitation = ExcitationMode::OffPolicy;
        cfg.off_policy_gain = Some(Gain(scalar(0.0)));
        cfg.theta0 = cfg.true_plant.theta();
        cfg.horizon = 200;
        cfg.state_cap = 1e6;
        let schedule = NoiseSchedule::new(NoiseKind::None, 1, 0).unwrap();
        assert!(matches!(orls_pi_run(&cfg, &schedule), Err(Error::Divergence { .. })));
    }

    #[test]
    fn state_and_data_bound_formulas() {
        assert_eq!(state_bound(1.0, 0.0, 0.0, 0.3, 2.5).unwrap(), 2.5);
        assert_eq!(state_bound(1.0, 1.0, 0.5, 0.5, 0.0).unwrap(), 3.0);
        assert!(state_bound(1.0, 1.0, 0.5, 1.0, 0.0).is_err());
        assert_eq!(data_bound(0.0, 0.0, 0.0), 0.0);
        assert_eq!(data_bound(1.0, 3.0, 1.0), 7.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = scalar_config();
        cfg.horizon = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = scalar_config();
        cfg.dither_bound = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = scalar_config();
        cfg.theta0 = Mat::zeros(1, 3);
        assert!(cfg.validate().is_err());
    }
}
