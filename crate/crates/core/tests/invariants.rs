mod common;

use gaussify::distill::{ideal_step, ideal_step_fast, iterate, lossy_step, IterateOptions};
use gaussify::gaussian::{b_matrix, en_map, is_physical, predict_limit, Seeds};
use gaussify::measures::log_negativity;
use gaussify::prep::{apply_beam_splitter, loss_channel_fock, BeamSplitterSpec};
use proptest::prelude::*;

fn small() -> ProptestConfig {
    ProptestConfig {
        cases: 16,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(small())]

    #[test]
    fn maps_return_hermitian_positive_operators(seed in any::<u64>(), cutoff in 2usize..5, eta in 0.0f64..=1.0) {
        let rho = common::random_state(cutoff, seed);
        for out in [ideal_step(&rho).unwrap(), lossy_step(&rho, eta).unwrap()] {
            prop_assert!(out.hermitian_residual() <= 1e-14);
            prop_assert!(out.trace().re > 0.0);
            let min = out.min_eigenvalue().unwrap();
            prop_assert!(min >= -1e-12 * out.trace().re, "min eigenvalue {}", min);
        }
    }

    #[test]
    fn fast_kernel_agrees(seed in any::<u64>(), cutoff in 1usize..6) {
        let rho = common::random_state(cutoff, seed);
        let d = ideal_step(&rho).unwrap().max_abs_diff(&ideal_step_fast(&rho).unwrap()).unwrap();
        prop_assert!(d <= 1e-12);
    }

    #[test]
    fn partial_transpose_is_an_involution(seed in any::<u64>(), cutoff in 1usize..5) {
        let rho = common::random_state(cutoff, seed);
        let back = rho.partial_transpose().unwrap().partial_transpose().unwrap();
        prop_assert_eq!(back.coeffs(), rho.coeffs());
    }

    #[test]
    fn seeds_are_frozen_after_one_step(seed in any::<u64>()) {
        let rho = common::random_state(4, seed);
        let tr = iterate(&rho, &IterateOptions { steps: 3, ..Default::default() }).unwrap();
        let s1 = tr.records[1].seeds.unwrap();
        for r in &tr.records[2..] {
            prop_assert!(r.seeds.unwrap().max_abs_diff(&s1) <= 1e-10);
        }
    }

    #[test]
    fn seeds_survive_b_matrix_roundtrip(seed in any::<u64>(), cutoff in 2usize..5) {
        let rho = common::random_state(cutoff, seed);
        let seeds = Seeds::of(&rho).unwrap();
        prop_assert!(en_map(&b_matrix(&rho).unwrap()).max_abs_diff(&seeds) <= 1e-13);
    }

    #[test]
    fn predicted_limit_of_a_state_is_physical(seed in any::<u64>()) {
        let rho = common::random_state(3, seed);
        let rho1 = ideal_step(&rho).unwrap().normalized().unwrap();
        let limit = predict_limit(&rho1).unwrap();
        prop_assert!(limit.physical);
        prop_assert!(is_physical(&limit.gamma));
    }

    #[test]
    fn local_operations_do_not_raise_negativity(seed in any::<u64>(), theta in 0.0f64..=1.0) {
        let rho = common::random_state(3, seed);
        let lossy = loss_channel_fock(&rho, 1, theta).unwrap();
        prop_assert!((lossy.trace().re - 1.0).abs() <= 1e-12);
        prop_assert!(log_negativity(&lossy).unwrap() <= log_negativity(&rho).unwrap() + 1e-10);
    }

    #[test]
    fn beam_splitter_inverse_undoes_it(seed in any::<u64>(), t in 0.05f64..0.95) {
        // The pair is kept at total photon number <= cutoff so nothing is truncated.
        let rho = common::random_state(3, seed);
        let mut low = rho.clone();
        for k in 0..16 {
            for b in 0..16 {
                let (ik, ib) = (rho.unflat(k), rho.unflat(b));
                if ik[0] + ik[1] > 3 || ib[0] + ib[1] > 3 {
                    low.set(&ik, &ib, gaussify::Complex64::new(0.0, 0.0)).unwrap();
                }
            }
        }
        let r = (1.0 - t * t).sqrt();
        let fwd = BeamSplitterSpec::real(t, 0, 1).unwrap();
        let inv = BeamSplitterSpec::new(t.into(), (-r).into(), 0, 1).unwrap();
        let back = apply_beam_splitter(&apply_beam_splitter(&low, &fwd).unwrap(), &inv).unwrap();
        prop_assert!(back.max_abs_diff(&low).unwrap() <= 1e-12);
    }
}
