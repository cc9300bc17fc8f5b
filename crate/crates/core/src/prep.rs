//! Linear optics on truncated Fock spaces and the input state families.
//!
//! The beam splitter is
//! `U = T^{a₁†a₁} exp(−R* a₂†a₁) exp(R a₂a₁†) T^{−a₂†a₂}`, which conserves the
//! total photon number of the mode pair. It is built block by block over that
//! number, where the two exponentials are nilpotent and their series
//! terminate. With `T = R = 1/√2` a photon entering the first port leaves as
//! `(|1,0⟩ − |0,1⟩)/√2` and one entering the second as `(|1,0⟩ + |0,1⟩)/√2`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::FockOperator;
use crate::util::sqrt_binom;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Complex transmission and reflection amplitudes acting on a mode pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSplitterSpec {
    pub t: Complex64,
    pub r: Complex64,
    /// `(first, second)` mode of the pair.
    pub modes: (usize, usize),
}

impl BeamSplitterSpec {
    pub fn new(t: Complex64, r: Complex64, first: usize, second: usize) -> Result<Self> {
        let norm = t.norm_sqr() + r.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 || t.norm() < 1e-12 {
            return Err(Error::NonUnitary { norm });
        }
        if first == second {
            return Err(Error::InvalidMode { mode: second, modes: 0 });
        }
        Ok(Self {
            t,
            r,
            modes: (first, second),
        })
    }

    /// Real amplitudes `T = transmittance`, `R = √(1 − T²)`.
    pub fn real(transmittance: f64, first: usize, second: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmittance) {
            return Err(Error::OutOfRange {
                name: "transmittance",
                value: transmittance,
                domain: "(0, 1]",
            });
        }
        let r = (1.0 - transmittance * transmittance).max(0.0).sqrt();
        Self::new(
            Complex64::new(transmittance, 0.0),
            Complex64::new(r, 0.0),
            first,
            second,
        )
    }

    /// The 50:50 splitter `T = R = 1/√2`.
    pub fn balanced(first: usize, second: usize) -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            t: h,
            r: h,
            modes: (first, second),
        }
    }
}

/// Matrix of `U` on the block of total photon number `n`, in the basis
/// `|j, n−j⟩`, `j = 0..=n` (`j` photons in the first mode).
pub fn beam_splitter_block(t: Complex64, r: Complex64, n: usize) -> DMatrix<Complex64> {
    let d = n + 1;
    // a₂†a₁ : |j, n−j⟩ ↦ √j √(n−j+1) |j−1, n−j+1⟩
    let mut lower = DMatrix::<Complex64>::zeros(d, d);
    // a₂a₁† : |j, n−j⟩ ↦ √(j+1) √(n−j) |j+1, n−j−1⟩
    let mut raise = DMatrix::<Complex64>::zeros(d, d);
    for j in 0..d {
        if j > 0 {
            lower[(j - 1, j)] = Complex64::new((j as f64 * (n - j + 1) as f64).sqrt(), 0.0);
        }
        if j < n {
            raise[(j + 1, j)] = Complex64::new(((j + 1) as f64 * (n - j) as f64).sqrt(), 0.0);
        }
    }
    let left = nilpotent_exp(&(lower * (-r.conj())));
    let right = nilpotent_exp(&(raise * r));
    let mut u = left * right;
    for j in 0..d {
        // T^{a₁†a₁} on rows, T^{−a₂†a₂} on columns.
        let row_scale = t.powi(j as i32);
        for c in 0..d {
            u[(j, c)] *= row_scale;
        }
    }
    for c in 0..d {
        let col_scale = t.powi(-((n - c) as i32));
        for j in 0..d {
            u[(j, c)] *= col_scale;
        }
    }
    u
}

fn nilpotent_exp(x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let d = x.nrows();
    let mut acc = DMatrix::<Complex64>::identity(d, d);
    let mut term = DMatrix::<Complex64>::identity(d, d);
    for p in 1..d {
        term = &term * x / Complex64::new(p as f64, 0.0);
        acc += &term;
    }
    acc
}

type BlockKey = (u64, u64, u64, u64, usize);

/// Cached blocks `n = 0..=max_total` for one `(T, R)`.
pub fn beam_splitter_blocks(t: Complex64, r: Complex64, max_total: usize) -> Arc<Vec<DMatrix<Complex64>>> {
    static CACHE: OnceLock<Mutex<HashMap<BlockKey, Arc<Vec<DMatrix<Complex64>>>>>> = OnceLock::new();
    let key = (
        t.re.to_bits(),
        t.im.to_bits(),
        r.re.to_bits(),
        r.im.to_bits(),
        max_total,
    );
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().unwrap().get(&key) {
        return hit.clone();
    }
    let blocks = Arc::new(
        (0..=max_total)
            .map(|n| beam_splitter_block(t, r, n))
            .collect::<Vec<_>>(),
    );
    cache.lock().unwrap().insert(key, blocks.clone());
    blocks
}

/// `U op U†` with `U` acting on the two modes named in `spec`.
///
/// Components of `U|k⟩` outside the cutoff are dropped, so the trace is
/// preserved only for operators whose support on the pair has total photon
/// number at most the cutoff.
pub fn apply_beam_splitter(op: &FockOperator, spec: &BeamSplitterSpec) -> Result<FockOperator> {
    let (m1, m2) = spec.modes;
    let modes = op.modes();
    for m in [m1, m2] {
        if m >= modes {
            return Err(Error::InvalidMode { mode: m, modes });
        }
    }
    if m1 == m2 {
        return Err(Error::InvalidMode { mode: m2, modes });
    }
    let norm = spec.t.norm_sqr() + spec.r.norm_sqr();
    if (norm - 1.0).abs() > 1e-12 || spec.t.norm() < 1e-12 {
        return Err(Error::NonUnitary { norm });
    }
    let cutoff = op.cutoff();
    let dim = op.dim();
    let blocks = beam_splitter_blocks(spec.t, spec.r, 2 * cutoff);

    // images[k] = U|k⟩ as (k', amplitude) pairs.
    let images: Vec<Vec<(usize, Complex64)>> = (0..dim)
        .map(|k| {
            let idx = op.unflat(k);
            let (x1, x2) = (idx[m1], idx[m2]);
            let n = x1 + x2;
            let block = &blocks[n];
            let mut out = Vec::with_capacity(n + 1);
            for j in n.saturating_sub(cutoff)..=n.min(cutoff) {
                let amp = block[(j, x1)];
                if amp == ZERO {
                    continue;
                }
                let mut img = idx.clone();
                img[m1] = j;
                img[m2] = n - j;
                out.push((op.flat(&img).unwrap(), amp));
            }
            out
        })
        .collect();

    let src = op.coeffs();
    let mut tmp = vec![ZERO; dim * dim];
    for (k, img) in images.iter().enumerate() {
        let row = &src[k * dim..(k + 1) * dim];
        for &(kp, amp) in img {
            let dst = &mut tmp[kp * dim..(kp + 1) * dim];
            for (d, &s) in dst.iter_mut().zip(row) {
                *d += amp * s;
            }
        }
    }
    let mut out = vec![ZERO; dim * dim];
    for kp in 0..dim {
        let row = &tmp[kp * dim..(kp + 1) * dim];
        let dst = &mut out[kp * dim..(kp + 1) * dim];
        for (b, img) in images.iter().enumerate() {
            let x = row[b];
            if x == ZERO {
                continue;
            }
            for &(bp, amp) in img {
                dst[bp] += x * amp.conj();
            }
        }
    }
    let mut res = FockOperator::from_raw(modes, cutoff, out, false);
    if op.is_marked_hermitian() {
        res.hermitize();
    }
    Ok(res)
}

/// Outcome of a dichotomic photon detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KrausElement {
    /// `E₁ = |0⟩⟨0|`: no photon seen.
    Vacuum,
    /// `E₂ = 𝟙 − |0⟩⟨0|`: the detector clicked.
    Click,
}

/// Condition on a detector outcome on `mode` and discard that mode. The
/// result is unnormalized; its trace is the outcome probability.
pub fn condition(op: &FockOperator, kraus: KrausElement, mode: usize) -> Result<FockOperator> {
    let modes = op.modes();
    if mode >= modes {
        return Err(Error::InvalidMode { mode, modes });
    }
    let vac = project_vacuum(op, mode)?;
    match kraus {
        KrausElement::Vacuum => Ok(vac),
        KrausElement::Click => op.trace_out(mode)?.sub(&vac),
    }
}

/// Probability of a detector outcome on `mode`, for operators of any mode
/// count.
pub fn outcome_probability(op: &FockOperator, kraus: KrausElement, mode: usize) -> Result<f64> {
    let modes = op.modes();
    if mode >= modes {
        return Err(Error::InvalidMode { mode, modes });
    }
    let dim = op.dim();
    let vac: f64 = (0..dim)
        .filter(|&k| op.unflat(k)[mode] == 0)
        .map(|k| op.coeffs()[k * dim + k].re)
        .sum();
    Ok(match kraus {
        KrausElement::Vacuum => vac,
        KrausElement::Click => op.trace().re - vac,
    })
}

fn project_vacuum(op: &FockOperator, mode: usize) -> Result<FockOperator> {
    let modes = op.modes();
    if modes == 1 {
        return Err(Error::ModeCount { expected: 2, actual: 1 });
    }
    let side = op.side();
    let inner = side.pow((modes - 1 - mode) as u32);
    let outer = side.pow(mode as u32);
    let dim = op.dim();
    let rdim = outer * inner;
    let mut out = vec![ZERO; rdim * rdim];
    for kr in 0..rdim {
        let k = (kr / inner) * side * inner + kr % inner;
        for br in 0..rdim {
            let b = (br / inner) * side * inner + br % inner;
            out[kr * rdim + br] = op.coeffs()[k * dim + b];
        }
    }
    Ok(FockOperator::from_raw(
        modes - 1,
        op.cutoff(),
        out,
        op.is_marked_hermitian(),
    ))
}

/// Photon loss on one mode with amplitude transmittance `theta` (photon
/// survival probability `θ²`), in Kraus form
/// `K_j = Σ_n √C(n,j) θ^{n−j} (1−θ²)^{j/2} |n−j⟩⟨n|`.
pub fn loss_channel_fock(op: &FockOperator, mode: usize, theta: f64) -> Result<FockOperator> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::OutOfRange {
            name: "theta",
            value: theta,
            domain: "[0, 1]",
        });
    }
    let modes = op.modes();
    if mode >= modes {
        return Err(Error::InvalidMode { mode, modes });
    }
    let cutoff = op.cutoff();
    let side = op.side();
    let loss = 1.0 - theta * theta;
    // kraus[j][x] = ⟨x−j|K_j|x⟩
    let kraus: Vec<Vec<f64>> = (0..side)
        .map(|j| {
            (0..side)
                .map(|x| {
                    if x < j {
                        0.0
                    } else {
                        sqrt_binom(x, j) * theta.powi((x - j) as i32) * loss.powf(j as f64 / 2.0)
                    }
                })
                .collect()
        })
        .collect();
    let dim = op.dim();
    let stride = side.pow((modes - 1 - mode) as u32);
    let src = op.coeffs();
    let mut out = vec![ZERO; dim * dim];
    for k in 0..dim {
        let xk = (k / stride) % side;
        for b in 0..dim {
            let xb = (b / stride) % side;
            let mut acc = ZERO;
            for j in 0..=(cutoff - xk.max(xb)) {
                let w = kraus[j][xk + j] * kraus[j][xb + j];
                if w != 0.0 {
                    acc += src[(k + j * stride) * dim + b + j * stride] * w;
                }
            }
            out[k * dim + b] = acc;
        }
    }
    Ok(FockOperator::from_raw(modes, cutoff, out, op.is_marked_hermitian()))
}

/// The finite-support example inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExampleState {
    /// Pure `(|0,0⟩ + ε|1,1⟩)/√(1+ε²)`, `ε ∈ [0, 1)`.
    Example1(f64),
    /// Mixture of `|0,0⟩ + |1,1⟩` with weight `ε` on `|0,1⟩`, `ε ≥ 0`.
    Example2(f64),
    /// Example 1 with the coherence halved, `ε ∈ [0, 1)`.
    Example3(f64),
}

fn check_range(name: &'static str, value: f64, lo: f64, hi: f64, domain: &'static str, hi_open: bool) -> Result<()> {
    let ok = value.is_finite() && value >= lo && if hi_open { value < hi } else { value <= hi };
    if ok {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value, domain })
    }
}

fn two_mode_from(cutoff: usize, entries: &[([usize; 4], f64)]) -> Result<FockOperator> {
    if cutoff < 1 {
        return Err(Error::OutOfRange {
            name: "cutoff",
            value: cutoff as f64,
            domain: "[1, ∞)",
        });
    }
    let mut op = FockOperator::zeros(2, cutoff)?;
    for &([s, t, n, m], v) in entries {
        op.set_hermitian(&[s, t], &[n, m], Complex64::new(v, 0.0))?;
    }
    Ok(op)
}

pub fn example_state(which: ExampleState, cutoff: usize) -> Result<FockOperator> {
    match which {
        ExampleState::Example1(e) => {
            check_range("epsilon", e, 0.0, 1.0, "[0, 1)", true)?;
            let n = 1.0 + e * e;
            two_mode_from(
                cutoff,
                &[
                    ([0, 0, 0, 0], 1.0 / n),
                    ([1, 1, 0, 0], e / n),
                    ([1, 1, 1, 1], e * e / n),
                ],
            )
        }
        ExampleState::Example2(e) => {
            check_range("epsilon", e, 0.0, f64::INFINITY, "[0, ∞)", true)?;
            let p = 1.0 / (2.0 + e);
            two_mode_from(
                cutoff,
                &[
                    ([0, 0, 0, 0], p),
                    ([1, 1, 0, 0], p),
                    ([1, 1, 1, 1], p),
                    ([0, 1, 0, 1], e * p),
                ],
            )
        }
        ExampleState::Example3(e) => {
            check_range("epsilon", e, 0.0, 1.0, "[0, 1)", true)?;
            let n = 1.0 + e * e;
            two_mode_from(
                cutoff,
                &[
                    ([0, 0, 0, 0], 1.0 / n),
                    ([1, 1, 0, 0], e / (2.0 * n)),
                    ([1, 1, 1, 1], e * e / n),
                ],
            )
        }
    }
}

/// State reached by the preparatory step followed by symmetric fibre loss
/// of amplitude transmittance `theta`.
pub fn prepared_family(lambda: f64, theta: f64, cutoff: usize) -> Result<FockOperator> {
    check_range("lambda", lambda, 0.0, 1.0, "[0, 1]", false)?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::OutOfRange {
            name: "theta",
            value: theta,
            domain: "(0, 1]",
        });
    }
    let eps = (1.0 - theta * theta) / (theta * theta);
    let l2 = lambda * lambda;
    let n = 1.0 + l2 * eps + l2;
    two_mode_from(
        cutoff,
        &[
            ([0, 0, 0, 0], 1.0 / n),
            ([1, 1, 0, 0], lambda / n),
            ([1, 1, 1, 1], l2 / n),
            ([0, 1, 0, 1], eps * l2 / n),
        ],
    )
}

/// Result of the preparatory step on two two-mode squeezed vacua.
#[derive(Clone, Debug)]
pub struct PreparedOutput {
    /// Normalized kept two-mode state.
    pub state: FockOperator,
    /// Probability that both detectors click.
    pub probability: f64,
}

/// Mix two copies of a two-mode squeezed vacuum of amplitude `source_lambda`
/// on beam splitters of transmittance `t` (one per side) and keep the other
/// output pair when both detectors click.
///
/// A local phase `(−1)^n` on the second kept mode is applied when needed so
/// that the `|1,1⟩⟨0,0|` coherence is non-negative.
pub fn preparatory_step(source_lambda: f64, t: f64, cutoff: usize) -> Result<PreparedOutput> {
    if !(0.0..1.0).contains(&t) || t <= 0.0 {
        return Err(Error::OutOfRange {
            name: "transmittance",
            value: t,
            domain: "(0, 1)",
        });
    }
    let tmss = crate::gaussian::tmss_fock(source_lambda, cutoff)?;
    // modes: (A₁, B₁, A₂, B₂)
    let mut four = tmss.tensor(&tmss)?;
    four = apply_beam_splitter(&four, &BeamSplitterSpec::real(t, 0, 2)?)?;
    four = apply_beam_splitter(&four, &BeamSplitterSpec::real(t, 1, 3)?)?;
    // Detectors sit on A₁, B₁; after removing A₁ the B₁ detector is mode 0.
    let three = condition(&four, KrausElement::Click, 0)?;
    let kept = condition(&three, KrausElement::Click, 0)?;
    let probability = kept.trace().re;
    let mut state = kept.normalized()?;
    if state.get2(1, 1, 0, 0).re < 0.0 {
        state = local_parity(&state, 1);
    }
    Ok(PreparedOutput { state, probability })
}

/// Conjugation by `(−1)^{a†a}` on one mode of a two-mode operator.
fn local_parity(op: &FockOperator, mode: usize) -> FockOperator {
    let dim = op.dim();
    let mut out = op.coeffs().to_vec();
    for k in 0..dim {
        let pk = op.unflat(k)[mode];
        for b in 0..dim {
            if (pk + op.unflat(b)[mode]) % 2 == 1 {
                out[k * dim + b] = -out[k * dim + b];
            }
        }
    }
    FockOperator::from_raw(op.modes(), op.cutoff(), out, op.is_marked_hermitian())
}

/// Best point of the preparatory parameter scan.
#[derive(Clone, Debug)]
pub struct PrepScanResult {
    pub source_lambda: f64,
    pub transmittance: f64,
    pub fidelity: f64,
    pub probability: f64,
}

/// `⟨ψ|ρ|ψ⟩` with `|ψ⟩ ∝ |0,0⟩ + λ|1,1⟩`.
pub fn target_fidelity(rho: &FockOperator, lambda: f64) -> f64 {
    let n = 1.0 + lambda * lambda;
    let (a, b) = (1.0 / n.sqrt(), lambda / n.sqrt());
    (rho.get2(0, 0, 0, 0) * a * a
        + rho.get2(0, 0, 1, 1) * a * b
        + rho.get2(1, 1, 0, 0) * a * b
        + rho.get2(1, 1, 1, 1) * b * b)
        .re
}

/// Bounded grid search over the source squeezing and the splitter
/// reflectivity for the preparatory step whose output is closest to
/// `|0,0⟩ + λ|1,1⟩`. Both axes are logarithmic; each refinement round zooms
/// in around the best point.
pub fn preparatory_scan(target_lambda: f64, cutoff: usize, rounds: usize) -> Result<PrepScanResult> {
    check_range("lambda", target_lambda, 0.0, 1.0, "[0, 1)", true)?;
    if cutoff > 4 {
        return Err(Error::ResourceGuard {
            what: "preparatory scan (four-mode operator)",
            cutoff,
            max: 4,
        });
    }
    let eval = |lq: f64, lr: f64| -> Option<PrepScanResult> {
        let q = 10f64.powf(lq);
        let r = 10f64.powf(lr);
        if q >= 1.0 || r >= 1.0 {
            return None;
        }
        let t = (1.0 - r * r).sqrt();
        let out = preparatory_step(q, t, cutoff).ok()?;
        Some(PrepScanResult {
            source_lambda: q,
            transmittance: t,
            fidelity: target_fidelity(&out.state, target_lambda),
            probability: out.probability,
        })
    };
    let (mut q_lo, mut q_hi) = (-3.0_f64, -0.3_f64);
    let (mut r_lo, mut r_hi) = (-3.0_f64, -0.01_f64);
    let steps = 12;
    let mut best: Option<PrepScanResult> = None;
    for _ in 0..rounds.max(1) {
        let mut best_at = (0.0, 0.0);
        for i in 0..=steps {
            let lq = q_lo + (q_hi - q_lo) * i as f64 / steps as f64;
            for j in 0..=steps {
                let lr = r_lo + (r_hi - r_lo) * j as f64 / steps as f64;
                if let Some(p) = eval(lq, lr) {
                    if best.as_ref().is_none_or(|b| p.fidelity > b.fidelity) {
                        best = Some(p);
                        best_at = (lq, lr);
                    }
                }
            }
        }
        let (dq, dr) = ((q_hi - q_lo) / steps as f64, (r_hi - r_lo) / steps as f64);
        q_lo = best_at.0 - 2.0 * dq;
        q_hi = (best_at.0 + 2.0 * dq).min(-1e-6);
        r_lo = best_at.1 - 2.0 * dr;
        r_hi = (best_at.1 + 2.0 * dr).min(-1e-6);
    }
    best.ok_or(Error::OutOfRange {
        name: "lambda",
        value: target_lambda,
        domain: "reachable by the preparatory scan",
    })
}

/// Photon-number distribution `P(n)` of the total photon number on a mode
/// pair; used to check that beam splitters act block-diagonally.
pub fn pair_number_distribution(op: &FockOperator, m1: usize, m2: usize) -> Vec<f64> {
    let dim = op.dim();
    let mut p = vec![0.0; 2 * op.cutoff() + 1];
    for k in 0..dim {
        let idx = op.unflat(k);
        p[idx[m1] + idx[m2]] += op.coeffs()[k * dim + k].re;
    }
    p
}
