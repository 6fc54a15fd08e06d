//! Recursive least squares for `x_{t+1} = θ d_t + w_t`, `θ = [A B]`,
//! `d_t = [x_t; u_t]`, together with local-persistency diagnostics and the
//! computable ISS bounds on the estimation error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::{identity, min_eigenvalue_sym, solve_linear, symmetrize, Mat, Vector};

/// Tolerance applied to the minimum-eigenvalue test of local persistency.
pub const PERSISTENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct RlsState {
    pub theta_hat: Mat,
    pub h: Mat,
    pub t: u64,
}

impl RlsState {
    /// `H₀ = a I`.
    pub fn new(theta0: Mat, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("H0 scale must be positive, got {a}")));
        }
        let n = theta0.ncols();
        Self::with_h0(theta0, identity(n) * a)
    }

    pub fn with_h0(theta0: Mat, h0: Mat) -> Result<Self> {
        if h0.shape() != (theta0.ncols(), theta0.ncols()) {
            return Err(Error::Dimension(format!(
                "H0 is {}x{}, theta has {} columns",
                h0.nrows(),
                h0.ncols(),
                theta0.ncols()
            )));
        }
        if min_eigenvalue_sym(&h0) <= 0.0 {
            return Err(Error::Domain("H0 must be positive definite".into()));
        }
        Ok(RlsState { theta_hat: theta0, h: symmetrize(&h0), t: 0 })
    }
}

/// `H' = H + d dᵀ`, `θ̂' = θ̂ + (x⁺ − θ̂ d) dᵀ H'⁻¹`.
pub fn rls_update(state: &RlsState, d: &Vector, x_next: &Vector) -> Result<RlsState> {
    let nd = state.h.nrows();
    if d.len() != nd || x_next.len() != state.theta_hat.nrows() {
        return Err(Error::Dimension(format!(
            "rls_update: regressor length {} (expected {nd}), target length {} (expected {})",
            d.len(),
            x_next.len(),
            state.theta_hat.nrows()
        )));
    }
    let h = &state.h + d * d.transpose();
    let innovation = x_next - &state.theta_hat * d;
    // dᵀH'⁻¹ = (H'⁻¹ d)ᵀ since H' is symmetric
    let gain = solve_linear(&h, &Mat::from_column_slice(nd, 1, d.as_slice()))?.solution;
    let theta_hat = &state.theta_hat + innovation * gain.transpose();
    Ok(RlsState { theta_hat, h, t: state.t + 1 })
}

fn right_divide(m: &Mat, h: &Mat) -> Result<Mat> {
    // m H⁻¹ = (H⁻ᵀ mᵀ)ᵀ
    Ok(solve_linear(&h.transpose(), &m.transpose())?.solution.transpose())
}

/// Closed form of RLS: `(θ̂₀H₀ + Σ x_{k+1} d_kᵀ)(H₀ + Σ d_k d_kᵀ)⁻¹`.
pub fn batch_ls_regularized(theta0: &Mat, h0: &Mat, data: &[(Vector, Vector)]) -> Result<Mat> {
    let mut num = theta0 * h0;
    let mut gram = h0.clone();
    for (d, x_next) in data {
        num += x_next * d.transpose();
        gram += d * d.transpose();
    }
    right_divide(&num, &gram)
}

/// `(θ̂₀−θ)H₀H_t⁻¹ + (Σ w_k d_kᵀ)H_t⁻¹`, the error `θ̂_t − θ` written in
/// terms of the initial error and the noise.
pub fn estimation_error_decomposition(
    theta0: &Mat,
    theta_true: &Mat,
    h0: &Mat,
    regressors: &[Vector],
    noise: &[Vector],
) -> Result<Mat> {
    if regressors.len() != noise.len() {
        return Err(Error::Dimension("regressor and noise sequences differ in length".into()));
    }
    let mut h = h0.clone();
    let mut noise_sum = Mat::zeros(theta0.nrows(), theta0.ncols());
    for (d, w) in regressors.iter().zip(noise) {
        h += d * d.transpose();
        noise_sum += w * d.transpose();
    }
    right_divide(&((theta0 - theta_true) * h0 + noise_sum), &h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencyParams {
    pub n_window: usize,
    pub m_interval: usize,
    pub alpha: f64,
}

/// Prefix sums of `d dᵀ` so any window sum costs one subtraction.
struct GramPrefix {
    sums: Vec<Mat>,
}

impl GramPrefix {
    fn new(data: &[Vector]) -> Self {
        let n = data.first().map_or(0, Vector::len);
        let mut sums = Vec::with_capacity(data.len() + 1);
        sums.push(Mat::zeros(n, n));
        for d in data {
            let next = sums.last().unwrap() + d * d.transpose();
            sums.push(next);
        }
        GramPrefix { sums }
    }

    /// Sum over 0-based indices `start..start+len`.
    fn window(&self, start: usize, len: usize) -> Mat {
        &self.sums[start + len] - &self.sums[start]
    }
}

/// Minimum over all complete windows (starts `0, M, 2M, …`, length `N`) of
/// the smallest eigenvalue of the window Gram sum. `None` if no window fits.
fn min_window_eigenvalue(prefix: &GramPrefix, len: usize, n_window: usize, m_interval: usize) -> Option<f64> {
    (0..)
        .map(|k| k * m_interval)
        .take_while(|start| start + n_window <= len)
        .map(|start| min_eigenvalue_sym(&prefix.window(start, n_window)))
        .reduce(f64::min)
}

/// Local persistency of `{d_t}` with window `N`, interval `M` and level `α`.
/// Windows that would run past the end of the data are not checked.
pub fn check_local_persistency(data: &[Vector], pers: &PersistencyParams) -> bool {
    if pers.n_window == 0 || pers.m_interval == 0 || data.len() < pers.n_window {
        return false;
    }
    let prefix = GramPrefix::new(data);
    match min_window_eigenvalue(&prefix, data.len(), pers.n_window, pers.m_interval) {
        Some(lambda) => lambda >= pers.alpha - PERSISTENCY_TOL,
        None => false,
    }
}

/// Smallest window `N ≤ n_max` for which the data is locally persistent at
/// interval `m_interval`, with the sharpest `α` for that window.
pub fn find_persistency_params(data: &[Vector], m_interval: usize, n_max: usize) -> Option<PersistencyParams> {
    if m_interval == 0 || data.is_empty() {
        return None;
    }
    let prefix = GramPrefix::new(data);
    (1..=n_max.min(data.len())).find_map(|n_window| {
        let alpha = min_window_eigenvalue(&prefix, data.len(), n_window, m_interval)?;
        (alpha > PERSISTENCY_TOL).then_some(PersistencyParams { n_window, m_interval, alpha })
    })
}

/// Constants of the RLS error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlsBoundParams {
    /// `H₀ = a I`.
    pub a: f64,
    pub pers: PersistencyParams,
    /// Bound on `|d_t|`.
    pub d_bar: f64,
    pub n_x: usize,
    pub n_u: usize,
}

impl RlsBoundParams {
    fn window_span(&self) -> f64 {
        (self.pers.m_interval + self.pers.n_window) as f64
    }

    fn min_level(&self) -> f64 {
        self.a.min(self.pers.alpha)
    }
}

/// `β_θ(s, t) = a(M+N)s / (min(a, α) t)`.
pub fn beta_theta(s0: f64, t: u64, p: &RlsBoundParams) -> Result<f64> {
    if t == 0 {
        return Err(Error::Domain("beta_theta is defined for t >= 1".into()));
    }
    Ok(p.a * p.window_span() * s0 / (p.min_level() * t as f64))
}

/// `η = (n_x + n_u)(M+N) / min(a, α)`.
pub fn eta(p: &RlsBoundParams) -> f64 {
    (p.n_x + p.n_u) as f64 * p.window_span() / p.min_level()
}

/// `γ_θ(x) = d̄ η x`.
pub fn gamma_theta(x: f64, p: &RlsBoundParams) -> f64 {
    p.d_bar * eta(p) * x
}

/// Energy-bounded variant of the noise term: `d̄ η ‖w‖₂ / √t`.
pub fn beta_energy(w_energy: f64, t: u64, p: &RlsBoundParams) -> Result<f64> {
    if t == 0 {
        return Err(Error::Domain("beta_energy is defined for t >= 1".into()));
    }
    Ok(p.d_bar * eta(p) * w_energy / (t as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseBoundKind {
    /// `noise_level = ‖w‖∞`
    Pointwise,
    /// `noise_level = ‖w‖₂`
    Energy,
}

/// Largest estimation error over all `t ≥ 0`:
/// `max{ |θ̂₀−θ|, β_θ(|θ̂₀−θ|, 1) + d̄ η noise_level }`.
pub fn max_est_error(theta0_err: f64, p: &RlsBoundParams, noise_level: f64, _kind: NoiseBoundKind) -> Result<f64> {
    // both noise models share the same expression, only the norm fed in differs
    Ok(theta0_err.max(beta_theta(theta0_err, 1, p)? + p.d_bar * eta(p) * noise_level))
}

/// Lower bound on `λ_min(H_t)` implied by local persistency: `a + ⌊t/(M+N)⌋ α`.
pub fn h_min_eig_lower_bound(t: u64, p: &RlsBoundParams) -> f64 {
    let span = (p.pers.m_interval + p.pers.n_window) as u64;
    p.a + (t / span) as f64 * p.pers.alpha
}

/// Checks `λ_min(H_t) ≥ a + ⌊t/(M+N)⌋α` on a recorded `(t, λ_min(H_t))` trace.
pub fn h_min_eig_growth_check(trace: &[(u64, f64)], p: &RlsBoundParams) -> bool {
    trace
        .iter()
        .all(|&(t, lambda)| lambda >= h_min_eig_lower_bound(t, p) - PERSISTENCY_TOL * lambda.abs().max(1.0))
}
