#![allow(dead_code)]

use orlspi_core::lqr::{lqr, CostWeights, Gain, Plant};
use orlspi_core::matops::{from_rows, identity, Mat, Vector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rows(r: &[&[f64]]) -> Mat {
    from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap()
}

pub fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

/// Random plant with an LQR solution under `Q = I`, `R = I`.
pub fn random_stabilizable(rng: &mut ChaCha8Rng, n_x: usize, n_u: usize) -> (Plant, CostWeights) {
    let w = CostWeights::new(identity(n_x), identity(n_u)).unwrap();
    loop {
        let plant = Plant::new(uniform(rng, n_x, n_x, 1.2), uniform(rng, n_x, n_u, 1.0)).unwrap();
        if lqr(&plant, &w).is_ok() {
            return (plant, w);
        }
    }
}

/// A stabilizing gain that differs from the optimum: the LQR gain of a perturbed model.
pub fn suboptimal_gain(rng: &mut ChaCha8Rng, plant: &Plant, w: &CostWeights) -> Gain {
    use orlspi_core::lqr::is_stabilizing;
    for _ in 0..50 {
        let a = &plant.a + uniform(rng, plant.n_x(), plant.n_x(), 0.1);
        let b = &plant.b + uniform(rng, plant.n_x(), plant.n_u(), 0.1);
        if let Ok((_, k)) = lqr(&Plant::new(a, b).unwrap(), w) {
            if is_stabilizing(plant, &k).unwrap() {
                return k;
            }
        }
    }
    lqr(plant, w).unwrap().1
}

/// The 3-state benchmark plant with full actuation.
pub fn benchmark_plant() -> (Plant, CostWeights) {
    let a = rows(&[&[1.01, 0.01, 0.0], &[0.01, 1.01, 0.01], &[0.0, 0.01, 1.01]]);
    (
        Plant::new(a, identity(3)).unwrap(),
        CostWeights::new(identity(3) * 0.001, identity(3)).unwrap(),
    )
}
