mod common;

use common::{random_stabilizable, suboptimal_gain, uniform, uniform_vec};
use orlspi_core::lqr::{bellman_residual, lqr, model_based_pi, policy_evaluation, CostWeights, Plant};
use orlspi_core::matops::{identity, is_psd, kron, symmetrize, unvec, vec, Mat};
use orlspi_core::noise::{energy_norm, sup_norm, NoiseKind, NoiseSchedule};
use orlspi_core::pi_dynamics::pi_step_vectorized;
use orlspi_core::sysid::{batch_ls_regularized, check_local_persistency, find_persistency_params, rls_update, RlsState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn vec_unvec_round_trip(seed in any::<u64>(), r in 1usize..6, c in 1usize..6) {
        let m = uniform(&mut rng(seed), r, c, 10.0);
        prop_assert_eq!(unvec(&vec(&m), r, c).unwrap(), m);
    }

    #[test]
    fn kron_vectorizes_sandwich_products(seed in any::<u64>(), n in 1usize..4, k in 1usize..4) {
        let mut g = rng(seed);
        let (e, x, f) = (uniform(&mut g, n, k, 1.0), uniform(&mut g, k, k, 1.0), uniform(&mut g, k, n, 1.0));
        let lhs = vec(&(&e * &x * &f));
        let rhs = kron(&f.transpose(), &e) * vec(&x);
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }

    #[test]
    fn rls_recursion_equals_batch(seed in any::<u64>(), len in 1usize..120, n_x in 1usize..4, n_u in 1usize..3) {
        let mut g = rng(seed);
        let nd = n_x + n_u;
        let theta = uniform(&mut g, n_x, nd, 1.0);
        let theta0 = uniform(&mut g, n_x, nd, 1.0);
        let a: f64 = g.random_range(0.01..5.0);
        let mut state = RlsState::new(theta0.clone(), a).unwrap();
        let mut data = Vec::new();
        for _ in 0..len {
            let d = uniform_vec(&mut g, nd, 3.0);
            let x_next = &theta * &d + uniform_vec(&mut g, n_x, 0.2);
            state = rls_update(&state, &d, &x_next).unwrap();
            data.push((d, x_next));
        }
        let batch = batch_ls_regularized(&theta0, &(identity(nd) * a), &data).unwrap();
        prop_assert!((state.theta_hat - batch).amax() <= 1e-9);
        prop_assert_eq!(state.t, len as u64);
    }

    #[test]
    fn policy_iteration_is_monotone(seed in any::<u64>(), n_x in 1usize..4) {
        let mut g = rng(seed);
        let n_u = g.random_range(1..=n_x);
        let (plant, w) = random_stabilizable(&mut g, n_x, n_u);
        let k0 = suboptimal_gain(&mut g, &plant, &w);
        let (p_star, _) = lqr(&plant, &w).unwrap();
        let iters = model_based_pi(&plant, &w, &k0, 8).unwrap();
        let scale = p_star.0.norm().max(1.0);
        for pair in iters.windows(2) {
            let step = symmetrize(&(&pair[0].p.0 - &pair[1].p.0));
            prop_assert!(is_psd(&step, 1e-9 * scale).unwrap());
        }
        for it in &iters {
            prop_assert!(is_psd(&symmetrize(&(&it.p.0 - &p_star.0)), 1e-9 * scale).unwrap());
        }
    }

    #[test]
    fn evaluation_solves_the_bellman_equation(seed in any::<u64>(), n_x in 1usize..4) {
        let mut g = rng(seed);
        let (plant, w) = random_stabilizable(&mut g, n_x, 1);
        let k = suboptimal_gain(&mut g, &plant, &w);
        let p = policy_evaluation(&plant, &w, &k).unwrap();
        prop_assert_eq!(&p.0, &p.0.transpose());
        prop_assert!(bellman_residual(&plant, &w, &k, &p) <= 1e-9 * p.0.norm().max(1.0));
        prop_assert!(is_psd(&p.0, 1e-12).unwrap());
    }

    #[test]
    fn pi_map_fixes_the_riccati_solution(seed in any::<u64>(), n_x in 1usize..4) {
        let mut g = rng(seed);
        let (plant, w) = random_stabilizable(&mut g, n_x, 1);
        let (p_star, _) = lqr(&plant, &w).unwrap();
        let next = pi_step_vectorized(&plant, &w, &p_star).unwrap();
        prop_assert!((next.0 - &p_star.0).norm() <= 1e-8 * p_star.0.norm().max(1.0));
    }

    #[test]
    fn noise_samples_hit_their_magnitude(seed in any::<u64>(), t in 1u64..1_000_000, dim in 1usize..6) {
        for kind in [NoiseKind::Pb1, NoiseKind::Pb2, NoiseKind::Eb] {
            let s = NoiseSchedule::new(kind, dim, seed).unwrap();
            let w = s.sample(t).unwrap();
            prop_assert!((w.norm() - s.magnitude_at(t).unwrap()).abs() <= 1e-14);
            prop_assert_eq!(w, s.sample(t).unwrap());
        }
    }

    #[test]
    fn noise_norm_ordering(seed in any::<u64>(), len in 1u64..300) {
        let trace = NoiseSchedule::new(NoiseKind::Pb1, 3, seed).unwrap().trace(len).unwrap();
        prop_assert!(energy_norm(&trace) <= len as f64 * sup_norm(&trace) + 1e-12);
    }

    #[test]
    fn found_persistency_parameters_verify(seed in any::<u64>(), len in 20usize..200) {
        let mut g = rng(seed);
        let data: Vec<_> = (0..len).map(|_| uniform_vec(&mut g, 3, 1.0)).collect();
        if let Some(p) = find_persistency_params(&data, 3, 12) {
            prop_assert!(check_local_persistency(&data, &p));
            prop_assert!(p.alpha > 0.0);
        }
    }
}

#[test]
fn weights_reject_indefinite_q() {
    let bad = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    assert!(CostWeights::new(bad, identity(1)).is_err());
    let _ = Plant::new(identity(2), Mat::zeros(2, 1)).unwrap();
}
