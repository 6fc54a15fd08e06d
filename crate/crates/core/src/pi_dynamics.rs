//! Policy iteration written as a discrete-time map on value kernels.
//!
//! With `α(P) = BᵀPA`, `β(P) = R + BᵀPB`, `Ω(P) = Aᵀ − α(P)ᵀβ(P)⁻¹Bᵀ` and
//! `Γ(P) = Q + α(P)ᵀβ(P)⁻¹Rβ(P)⁻¹α(P)`, one PI sweep is
//! `vec(P⁺) = 𝒜(P)⁻¹ vec(Γ(P))` with `𝒜(P) = I⊗I − Ω(P)⊗Ω(P)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::lqr::{CostWeights, Plant, ValueKernel};
use crate::matops::{identity, kron, solve_linear, symmetrize, unvec, vec, Mat, Vector};
use crate::rng::{stream_rng, DOMAIN_PERTURB};

/// The intermediate maps of one PI step evaluated at a kernel `P`.
#[derive(Debug, Clone)]
pub struct PiStepCache {
    pub alpha: Mat,
    pub beta: Mat,
    pub omega: Mat,
    pub gamma: Mat,
    pub script_a: Mat,
}

pub fn build_cache(plant: &Plant, w: &CostWeights, p: &ValueKernel) -> Result<PiStepCache> {
    w.check_dims(plant)?;
    let n = plant.n_x();
    let alpha = plant.b.transpose() * &p.0 * &plant.a;
    let beta = &w.r + plant.b.transpose() * &p.0 * &plant.b;
    // β⁻¹α, shared by Ω and Γ
    let beta_inv_alpha = solve_linear(&beta, &alpha)?.solution;
    let omega = plant.a.transpose() - beta_inv_alpha.transpose() * plant.b.transpose();
    let gamma = symmetrize(&(&w.q + beta_inv_alpha.transpose() * &w.r * &beta_inv_alpha));
    let script_a = kron(&identity(n), &identity(n)) - kron(&omega, &omega);
    Ok(PiStepCache { alpha, beta, omega, gamma, script_a })
}

/// One policy-iteration sweep through the vectorized linear system.
pub fn pi_step_vectorized(plant: &Plant, w: &CostWeights, p: &ValueKernel) -> Result<ValueKernel> {
    let cache = build_cache(plant, w, p)?;
    step_from_cache(&cache, plant.n_x())
}

fn step_from_cache(cache: &PiStepCache, n: usize) -> Result<ValueKernel> {
    let rhs = Mat::from_column_slice(n * n, 1, vec(&cache.gamma).as_slice());
    let sol = solve_linear(&cache.script_a, &rhs)?;
    let next = unvec(&Vector::from_column_slice(sol.solution.as_slice()), n, n)?;
    Ok(ValueKernel::symmetric(next))
}

/// Uniform symmetric perturbation rescaled to Frobenius norm `radius`.
fn symmetric_perturbation(n: usize, radius: f64, seed: u64, index: u64) -> Mat {
    let mut rng = stream_rng(seed, DOMAIN_PERTURB, index);
    let mut d = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = rng.random_range(-1.0..1.0);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    let norm = d.norm();
    if norm == 0.0 {
        d[(0, 0)] = radius;
        d
    } else {
        d * (radius / norm)
    }
}

/// Empirical contraction factor of the PI map around `p_star`: the largest
/// `|P⁺ − P*| / |ΔP|` over `samples` random symmetric perturbations of norm
/// `radius`. Samples whose step operator is singular are skipped.
pub fn contraction_estimate(
    plant: &Plant,
    w: &CostWeights,
    p_star: &ValueKernel,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {radius}")));
    }
    let n = plant.n_x();
    let mut worst: Option<f64> = None;
    for i in 0..samples {
        let delta = symmetric_perturbation(n, radius, seed, i as u64);
        let p = ValueKernel(&p_star.0 + &delta);
        let next = match pi_step_vectorized(plant, w, &p) {
            Ok(next) => next,
            Err(Error::Singular { .. }) => continue,
            Err(e) => return Err(e),
        };
        let ratio = (&next.0 - &p_star.0).norm() / delta.norm();
        worst = Some(worst.map_or(ratio, |m: f64| m.max(ratio)));
    }
    worst.ok_or(Error::EstimationFailed { samples })
}
