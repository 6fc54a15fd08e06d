//! Model-based LQR: policy evaluation, policy improvement, the Riccati
//! ground truth and plain (Hewer) policy iteration.

use crate::error::{Error, Result};
use crate::matops::{self, identity, kron, solve_linear, spectral_radius, symmetrize, unvec, Mat, Vector};

/// Margin on `ρ(A+BK) < 1` used to call a gain stabilizing.
pub const STABILITY_MARGIN: f64 = 1e-10;

/// Linear plant `x' = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub a: Mat,
    pub b: Mat,
}

impl Plant {
    pub fn new(a: Mat, b: Mat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!("A is {}x{}, must be square", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::Dimension(format!("B has {} rows, A has {}", b.nrows(), a.nrows())));
        }
        matops::ensure_finite(&a, "A")?;
        matops::ensure_finite(&b, "B")?;
        Ok(Plant { a, b })
    }

    /// Splits `θ = [A B]` back into a plant with `n_x` states.
    pub fn from_theta(theta: &Mat, n_x: usize) -> Result<Self> {
        if theta.nrows() != n_x || theta.ncols() <= n_x {
            return Err(Error::Dimension(format!(
                "theta is {}x{}, expected {n_x}x(>{n_x})",
                theta.nrows(),
                theta.ncols()
            )));
        }
        let a = theta.columns(0, n_x).into_owned();
        let b = theta.columns(n_x, theta.ncols() - n_x).into_owned();
        Plant::new(a, b)
    }

    pub fn theta(&self) -> Mat {
        let mut theta = Mat::zeros(self.n_x(), self.n_x() + self.n_u());
        theta.columns_mut(0, self.n_x()).copy_from(&self.a);
        theta.columns_mut(self.n_x(), self.n_u()).copy_from(&self.b);
        theta
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn closed_loop(&self, k: &Gain) -> Mat {
        &self.a + &self.b * &k.0
    }
}

/// Quadratic stage cost weights; `Q ⪰ 0`, `R ≻ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub q: Mat,
    pub r: Mat,
}

impl CostWeights {
    pub fn new(q: Mat, r: Mat) -> Result<Self> {
        if !matops::is_symmetric(&q, matops::SYMMETRY_TOL) || !matops::is_symmetric(&r, matops::SYMMETRY_TOL) {
            return Err(Error::Weights("Q and R must be symmetric".into()));
        }
        if !matops::is_psd(&q, matops::PSD_TOL)? {
            return Err(Error::Weights("Q must be positive semidefinite".into()));
        }
        if matops::min_eigenvalue_sym(&r) <= 1e-12 {
            return Err(Error::Weights("R must be positive definite".into()));
        }
        Ok(CostWeights { q: symmetrize(&q), r: symmetrize(&r) })
    }

    pub fn check_dims(&self, plant: &Plant) -> Result<()> {
        if self.q.nrows() != plant.n_x() || self.r.nrows() != plant.n_u() {
            return Err(Error::Dimension(format!(
                "weights Q {}x{} / R {}x{} do not match plant n_x={} n_u={}",
                self.q.nrows(),
                self.q.ncols(),
                self.r.nrows(),
                self.r.ncols(),
                plant.n_x(),
                plant.n_u()
            )));
        }
        Ok(())
    }
}

/// State-feedback gain `u = K x`, shape `n_u × n_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gain(pub Mat);

/// Symmetric quadratic value kernel `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueKernel(pub Mat);

impl ValueKernel {
    pub fn symmetric(p: Mat) -> Self {
        ValueKernel(symmetrize(&p))
    }
}

pub fn is_stabilizing(plant: &Plant, k: &Gain) -> Result<bool> {
    check_gain_dims(plant, k)?;
    Ok(spectral_radius(&plant.closed_loop(k))? < 1.0 - STABILITY_MARGIN)
}

fn check_gain_dims(plant: &Plant, k: &Gain) -> Result<()> {
    if k.0.shape() != (plant.n_u(), plant.n_x()) {
        return Err(Error::Dimension(format!(
            "gain is {}x{}, expected {}x{}",
            k.0.nrows(),
            k.0.ncols(),
            plant.n_u(),
            plant.n_x()
        )));
    }
    Ok(())
}

/// Solves the discrete Lyapunov equation `P = M + Lᵀ P L` through its
/// Kronecker form `(I − Lᵀ⊗Lᵀ) vec(P) = vec(M)`.
pub(crate) fn lyapunov_kron(l: &Mat, m: &Mat) -> Result<Mat> {
    let n = l.nrows();
    let lt = l.transpose();
    let op = identity(n * n) - kron(&lt, &lt);
    let rhs = Mat::from_column_slice(n * n, 1, matops::vec(m).as_slice());
    let sol = solve_linear(&op, &rhs)?;
    let v = Vector::from_column_slice(sol.solution.as_slice());
    Ok(symmetrize(&unvec(&v, n, n)?))
}

/// Value kernel of a stabilizing gain (the model-based Bellman equation).
pub fn policy_evaluation(plant: &Plant, w: &CostWeights, k: &Gain) -> Result<ValueKernel> {
    w.check_dims(plant)?;
    check_gain_dims(plant, k)?;
    let cl = plant.closed_loop(k);
    let rho = spectral_radius(&cl)?;
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(Error::NotStabilizing { rho });
    }
    let stage = &w.q + k.0.transpose() * &w.r * &k.0;
    Ok(ValueKernel(lyapunov_kron(&cl, &stage)?))
}

/// Frobenius norm of `P − (Q + KᵀRK + (A+BK)ᵀP(A+BK))`.
pub fn bellman_residual(plant: &Plant, w: &CostWeights, k: &Gain, p: &ValueKernel) -> f64 {
    let cl = plant.closed_loop(k);
    let rhs = &w.q + k.0.transpose() * &w.r * &k.0 + cl.transpose() * &p.0 * &cl;
    (&p.0 - rhs).norm()
}

/// Greedy gain `K = −(R + BᵀPB)⁻¹ BᵀPA`.
pub fn policy_improvement(plant: &Plant, w: &CostWeights, p: &ValueKernel) -> Result<Gain> {
    w.check_dims(plant)?;
    let btp = plant.b.transpose() * &p.0;
    let beta = &w.r + &btp * &plant.b;
    let alpha = &btp * &plant.a;
    let k = solve_linear(&beta, &alpha)?.solution;
    Ok(Gain(-k))
}

fn riccati_map(plant: &Plant, w: &CostWeights, p: &Mat) -> Result<Mat> {
    let (a, b) = (&plant.a, &plant.b);
    let atp = a.transpose() * p;
    let beta = &w.r + b.transpose() * p * b;
    let alpha = b.transpose() * p * a;
    let gain_part = solve_linear(&beta, &alpha)?.solution;
    Ok(symmetrize(&(&w.q + &atp * a - &atp * b * gain_part)))
}

/// Frobenius residual of the discrete algebraic Riccati equation at `p`.
pub fn dare_residual(plant: &Plant, w: &CostWeights, p: &ValueKernel) -> Result<f64> {
    Ok((&p.0 - riccati_map(plant, w, &p.0)?).norm())
}

/// Solves the DARE by iterating the Riccati recursion from `P₀ = Q`.
///
/// This is the ground truth every other route is compared against, so it
/// deliberately shares no code path with policy iteration. Once the step and
/// the residual are within `tol`, iteration continues until the step stops
/// shrinking, which leaves the result at the roundoff floor rather than
/// merely inside `tol`. Failure to reach `tol` within `max_iter` sweeps is
/// reported as a non-stabilizable plant.
pub fn dare_value_iteration(plant: &Plant, w: &CostWeights, tol: f64, max_iter: usize) -> Result<ValueKernel> {
    w.check_dims(plant)?;
    let mut p = w.q.clone();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..max_iter {
        let next = riccati_map(plant, w, &p)?;
        if !next.iter().all(|v| v.is_finite()) || next.amax() > 1e15 {
            break;
        }
        let step = (&next - &p).norm();
        if converged && step >= residual {
            return Ok(ValueKernel(p));
        }
        residual = step;
        p = next;
        if !converged && residual <= tol {
            converged = dare_residual(plant, w, &ValueKernel(p.clone()))? <= tol;
        }
    }
    if converged {
        return Ok(ValueKernel(p));
    }
    Err(Error::NotStabilizable { iterations: max_iter, residual })
}

/// Default tolerance / budget used when the DARE serves as an oracle.
pub const DARE_TOL: f64 = 1e-13;
pub const DARE_MAX_ITER: usize = 200_000;

/// Optimal kernel and gain `(P*, K*)` of a plant.
pub fn lqr(plant: &Plant, w: &CostWeights) -> Result<(ValueKernel, Gain)> {
    let p = dare_value_iteration(plant, w, DARE_TOL, DARE_MAX_ITER)?;
    let k = policy_improvement(plant, w, &p)?;
    Ok((p, k))
}

/// One evaluation/improvement pair of model-based policy iteration.
#[derive(Debug, Clone)]
pub struct PiIterate {
    pub p: ValueKernel,
    pub k_next: Gain,
}

/// Model-based policy iteration from a stabilizing `k0`; returns `(P_i, K_{i+1})`
/// for `i = 0..iters`.
pub fn model_based_pi(plant: &Plant, w: &CostWeights, k0: &Gain, iters: usize) -> Result<Vec<PiIterate>> {
    let mut k = k0.clone();
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        let p = policy_evaluation(plant, w, &k)?;
        let k_next = policy_improvement(plant, w, &p)?;
        k = k_next.clone();
        out.push(PiIterate { p, k_next });
    }
    Ok(out)
}

/// `x₀ᵀ P x₀`.
pub fn closed_loop_cost(p: &ValueKernel, x0: &Vector) -> Result<f64> {
    if p.0.nrows() != x0.len() {
        return Err(Error::Dimension(format!("x0 has length {}, P is {}x{}", x0.len(), p.0.nrows(), p.0.ncols())));
    }
    Ok(x0.dot(&(&p.0 * x0)))
}
