//! Bound verdicts evaluated on a recorded run.
//!
//! Every certificate uses realized quantities: `d̄` is the largest `|d_t|`
//! seen, `‖w‖∞`/`‖w‖₂` are the norms of the noise actually injected and the
//! persistency constants are those found on the run's own data.

use serde::{Deserialize, Serialize};

use crate::matops::{identity, Vector};
use crate::noise::{energy_norm, sup_norm};
use crate::orls::{data_bound, state_bound, IterateTrace};
use crate::sysid::{
    beta_energy, beta_theta, find_persistency_params, gamma_theta, h_min_eig_lower_bound,
    max_est_error, NoiseBoundKind, PersistencyParams, RlsBoundParams,
};

/// Relative slack for comparing a realized quantity with its bound.
pub const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub checked: usize,
    pub violations: usize,
    /// First violating timestep, if any.
    pub first_violation: Option<usize>,
    /// Smallest `bound − value` seen (negative on violation); `None` if nothing was checked.
    pub min_margin: Option<f64>,
    pub reason: String,
}

impl Verdict {
    pub fn not_applicable(reason: impl Into<String>) -> Self {
        Verdict {
            status: Status::NotApplicable,
            checked: 0,
            violations: 0,
            first_violation: None,
            min_margin: None,
            reason: reason.into(),
        }
    }

    /// Builds a verdict from `(t, value, bound)` triples.
    pub fn from_pairs(items: impl IntoIterator<Item = (usize, f64, f64)>, what: &str) -> Self {
        let mut checked = 0;
        let mut violations = 0;
        let mut first_violation = None;
        let mut min_margin: Option<f64> = None;
        for (t, value, bound) in items {
            checked += 1;
            let margin = bound - value;
            min_margin = Some(min_margin.map_or(margin, |m| m.min(margin)));
            if value > bound + BOUND_SLACK * bound.abs().max(1.0) {
                violations += 1;
                first_violation.get_or_insert(t);
            }
        }
        let status = if violations == 0 { Status::Pass } else { Status::Fail };
        let reason = match first_violation {
            None => format!("{what} holds at all {checked} checked steps"),
            Some(t) => format!("{what} violated at {violations} of {checked} steps (first at t={t})"),
        };
        Verdict { status, checked, violations, first_violation, min_margin, reason }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// How persistency constants are searched for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencySearch {
    pub m_interval: usize,
    pub n_max: usize,
}

impl PersistencySearch {
    /// `M = n_x + n_u`, `N ≤ 10 (n_x + n_u)`.
    pub fn for_dims(n_x: usize, n_u: usize) -> Self {
        PersistencySearch { m_interval: n_x + n_u, n_max: 10 * (n_x + n_u) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub persistency: Option<PersistencyParams>,
    pub h0_scale: Option<f64>,
    pub d_bar: f64,
    pub w_sup: f64,
    pub w_energy: f64,
    pub theta0_err: f64,
    pub max_est_error_pointwise: Option<f64>,
    pub max_est_error_energy: Option<f64>,
    pub rls_pointwise: Verdict,
    pub rls_energy: Verdict,
    pub lambda_min_growth: Verdict,
    pub noise_sums: Verdict,
    pub data_bound: Verdict,
    pub state_bound: Verdict,
}

/// `a` if `H₀ = aI`.
fn scalar_h0(trace: &IterateTrace) -> Option<f64> {
    let a = trace.h0[(0, 0)];
    let n = trace.h0.nrows();
    ((&trace.h0 - identity(n) * a).amax() == 0.0 && a > 0.0).then_some(a)
}

/// Runs every applicable bound check on a recorded trace.
///
/// `energy_bounded` says whether the noise schedule is summable; the
/// energy-form bound is only checked for such schedules.
pub fn evaluate(trace: &IterateTrace, search: PersistencySearch, energy_bounded: bool) -> BoundReport {
    let noise = trace.noise();
    let regressors = trace.regressors();
    let n_x = trace.theta_true.nrows();
    let n_u = trace.theta_true.ncols() - n_x;
    let d_bar = regressors.iter().map(Vector::norm).fold(0.0, f64::max);
    let w_sup = sup_norm(&noise);
    let w_energy = energy_norm(&noise);
    let theta0_err = (&trace.theta0 - &trace.theta_true).norm();
    let h0_scale = scalar_h0(trace);
    let persistency = find_persistency_params(&regressors, search.m_interval, search.n_max);

    let params = match (h0_scale, persistency) {
        (Some(a), Some(pers)) => Some(RlsBoundParams { a, pers, d_bar, n_x, n_u }),
        _ => None,
    };
    let missing = match (h0_scale, persistency) {
        (None, _) => "H0 is not a multiple of the identity",
        (_, None) => "no local persistency found on the realized data",
        _ => "",
    };

    let (rls_pointwise, rls_energy, lambda_min_growth, max_pw, max_en) = match &params {
        None => (
            Verdict::not_applicable(missing),
            Verdict::not_applicable(missing),
            Verdict::not_applicable(missing),
            None,
            None,
        ),
        Some(p) => {
            let pointwise = Verdict::from_pairs(
                trace.steps.iter().map(|s| {
                    let t = s.t as u64;
                    let bound = beta_theta(theta0_err, t, p).unwrap() + gamma_theta(w_sup, p);
                    (s.t, s.err_theta, bound)
                }),
                "pointwise-noise RLS bound",
            );
            let energy = if energy_bounded {
                Verdict::from_pairs(
                    trace.steps.iter().map(|s| {
                        let t = s.t as u64;
                        let bound = beta_theta(theta0_err, t, p).unwrap() + beta_energy(w_energy, t, p).unwrap();
                        (s.t, s.err_theta, bound)
                    }),
                    "energy-noise RLS bound",
                )
            } else {
                Verdict::not_applicable("noise schedule is not energy bounded")
            };
            let growth_trace: Vec<(u64, f64)> = trace.steps.iter().map(|s| (s.t as u64, s.lambda_min_h)).collect();
            let growth = Verdict::from_pairs(
                growth_trace.iter().map(|&(t, l)| (t as usize, h_min_eig_lower_bound(t, p), l)),
                "lambda_min(H_t) growth",
            );
            (
                pointwise,
                energy,
                growth,
                max_est_error(theta0_err, p, w_sup, NoiseBoundKind::Pointwise).ok(),
                max_est_error(theta0_err, p, w_energy, NoiseBoundKind::Energy).ok(),
            )
        }
    };

    BoundReport {
        persistency,
        h0_scale,
        d_bar,
        w_sup,
        w_energy,
        theta0_err,
        max_est_error_pointwise: max_pw,
        max_est_error_energy: max_en,
        rls_pointwise,
        rls_energy,
        lambda_min_growth,
        noise_sums: noise_sum_verdict(&noise),
        data_bound: data_bound_verdict(trace),
        state_bound: state_bound_verdict(trace),
    }
}

/// `Σ_{k≤t}|w_k| ≤ t‖w‖∞` and `Σ_{k≤t}|w_k| ≤ √t (Σ_{k≤t}|w_k|²)^{1/2} ≤ √t‖w‖₂`.
pub fn noise_sum_verdict(noise: &[Vector]) -> Verdict {
    let sup = sup_norm(noise);
    let energy = energy_norm(noise);
    let mut partial = 0.0;
    let mut partial_sq = 0.0;
    let mut items = Vec::with_capacity(2 * noise.len());
    for (i, w) in noise.iter().enumerate() {
        let t = (i + 1) as f64;
        let n = w.norm();
        partial += n;
        partial_sq += n * n;
        items.push((i + 1, partial, t * sup));
        items.push((i + 1, partial, t.sqrt() * partial_sq.sqrt()));
        items.push((i + 1, t.sqrt() * partial_sq.sqrt(), t.sqrt() * energy));
    }
    Verdict::from_pairs(items, "noise partial-sum inequalities")
}

/// Realized `|d_t| ≤ (1 + K̄) x̄ + ē` with `K̄`, `x̄`, `ē` the realized maxima.
fn data_bound_verdict(trace: &IterateTrace) -> Verdict {
    let k_bar = trace.steps.iter().map(|s| s.k_applied.0.norm()).fold(0.0, f64::max);
    let x_bar = trace.steps.iter().map(|s| s.x.norm()).fold(0.0, f64::max);
    let e_bar = trace.steps.iter().map(|s| s.e.norm()).fold(0.0, f64::max);
    let bound = data_bound(k_bar, x_bar, e_bar);
    Verdict::from_pairs(trace.steps.iter().map(|s| (s.t, s.d.norm(), bound)), "data bound")
}

/// Realized `|x_t|` against the state bound with `K̄_cl = max_t |A + B K_t|`.
fn state_bound_verdict(trace: &IterateTrace) -> Verdict {
    let n_x = trace.theta_true.nrows();
    let a = trace.theta_true.columns(0, n_x).into_owned();
    let b = trace.theta_true.columns(n_x, trace.theta_true.ncols() - n_x).into_owned();
    let k_cl = trace
        .steps
        .iter()
        .map(|s| (&a + &b * &s.k_applied.0).norm())
        .fold(0.0, f64::max);
    let e_bar = trace.steps.iter().map(|s| s.e.norm()).fold(0.0, f64::max);
    let w_sup = sup_norm(&trace.noise());
    let x0 = trace.steps.first().map_or(0.0, |s| s.x.norm());
    match state_bound(b.norm(), e_bar, w_sup, k_cl, x0) {
        Ok(bound) => Verdict::from_pairs(trace.steps.iter().map(|s| (s.t, s.x.norm(), bound)), "state bound"),
        Err(_) => Verdict::not_applicable(format!("closed-loop norm {k_cl:.4} is not below 1")),
    }
}
