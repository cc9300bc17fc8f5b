//! Browser bindings: a reduced-state Wigner grid after k steps, the
//! log-negativity per step for a detector efficiency, and the predicted
//! limit negativity across the example families.
//!
//! The `*_values` functions are plain Rust so they run in native tests; the
//! exported wrappers only translate errors for JavaScript.

use gaussify::distill::{ideal_step, iterate, IterateOptions, Kernel};
use gaussify::gaussian::{gaussian_log_negativity, predict_limit};
use gaussify::measures::{log_negativity, wigner_single_mode, WignerSpec};
use gaussify::prep::{example_state, ExampleState};
use gaussify::FockOperator;
use wasm_bindgen::prelude::*;

/// Largest cutoff the page may request; keeps one step well under a second.
pub const MAX_CUTOFF: usize = 14;

fn state(family: u8, epsilon: f64, cutoff: usize) -> Result<FockOperator, String> {
    if cutoff > MAX_CUTOFF {
        return Err(format!("cutoff {cutoff} above {MAX_CUTOFF}"));
    }
    let which = match family {
        1 => ExampleState::Example1(epsilon),
        2 => ExampleState::Example2(epsilon),
        3 => ExampleState::Example3(epsilon),
        other => return Err(format!("unknown example {other}")),
    };
    example_state(which, cutoff).map_err(|e| e.to_string())
}

fn run(rho: &FockOperator, steps: usize, eta: f64) -> Result<Vec<FockOperator>, String> {
    let opts = IterateOptions {
        steps,
        eta,
        kernel: Kernel::Fast,
        ..Default::default()
    };
    let traj = iterate(rho, &opts).map_err(|e| e.to_string())?;
    Ok(traj.states)
}

/// Row-major `points × points` samples of `W(q, p)` on `[-half_width,
/// half_width]²` for mode 0 of the state after `steps` ideal steps.
pub fn wigner_values(
    family: u8,
    epsilon: f64,
    steps: usize,
    cutoff: usize,
    half_width: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let rho = state(family, epsilon, cutoff)?;
    let states = run(&rho, steps, 1.0)?;
    let last = states.last().expect("input state is kept");
    let reduced = last.partial_trace(0).map_err(|e| e.to_string())?;
    let grid = wigner_single_mode(&reduced, &WignerSpec::square(half_width, points)).map_err(|e| e.to_string())?;
    Ok(grid.values)
}

/// `E_N` in bits for steps `0..=steps`, fewer if the success probability
/// collapses.
pub fn negativity_values(family: u8, epsilon: f64, eta: f64, steps: usize, cutoff: usize) -> Result<Vec<f64>, String> {
    let rho = state(family, epsilon, cutoff)?;
    run(&rho, steps, eta)?
        .iter()
        .map(|s| log_negativity(s).map_err(|e| e.to_string()))
        .collect()
}

/// For `samples` values of `ε` spread over the family's range, triples
/// `(ε, E_N(ρ), limit E_N)` flattened. A missing or unphysical limit is NaN.
pub fn limit_values(family: u8, samples: usize) -> Result<Vec<f64>, String> {
    let (lo, hi) = match family {
        2 => (0.05, 3.0),
        _ => (0.02, 0.96),
    };
    let mut out = Vec::with_capacity(3 * samples);
    for i in 0..samples {
        let eps = if samples == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (samples - 1) as f64
        };
        // The seeds involve photon numbers up to two, so a small cutoff is exact.
        let rho = state(family, eps, 3)?;
        let en0 = log_negativity(&rho).map_err(|e| e.to_string())?;
        let rho1 = ideal_step(&rho).map_err(|e| e.to_string())?;
        let rho1 = rho1.scaled(1.0 / rho1.trace().re);
        let limit = match predict_limit(&rho1) {
            Ok(p) if p.physical => gaussian_log_negativity(&p.gamma).unwrap_or(f64::NAN),
            _ => f64::NAN,
        };
        out.extend([eps, en0, limit]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn wigner_grid(
    family: u8,
    epsilon: f64,
    steps: usize,
    cutoff: usize,
    half_width: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    wigner_values(family, epsilon, steps, cutoff, half_width, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn negativity_curve(family: u8, epsilon: f64, eta: f64, steps: usize, cutoff: usize) -> Result<Vec<f64>, JsError> {
    negativity_values(family, epsilon, eta, steps, cutoff).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn limit_curve(family: u8, samples: usize) -> Result<Vec<f64>, JsError> {
    limit_values(family, samples).map_err(|e| JsError::new(&e))
}
