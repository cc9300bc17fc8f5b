#![allow(dead_code)]

use gaussify::{Complex64, FockOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random two-mode density matrix `AA†/tr`, with `A` damped geometrically in
/// the ket photon number so the state fits the cutoff.
pub fn random_state(cutoff: usize, seed: u64) -> FockOperator {
    random_state_damped(cutoff, seed, 0.6)
}

pub fn random_state_damped(cutoff: usize, seed: u64, damp: f64) -> FockOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = cutoff + 1;
    let dim = side * side;
    let a: Vec<Complex64> = (0..dim * dim)
        .map(|i| {
            let k = i / dim;
            let w = damp.powi(((k / side) + (k % side)) as i32);
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * w
        })
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            out[r * dim + c] = (0..dim).map(|j| a[r * dim + j] * a[c * dim + j].conj()).sum();
        }
    }
    let tr: f64 = (0..dim).map(|i| out[i * dim + i].re).sum();
    for z in &mut out {
        *z /= tr;
    }
    let mut op = FockOperator::from_coeffs(2, cutoff, out).unwrap();
    op.hermitize();
    op
}
