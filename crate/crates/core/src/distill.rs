//! One step of the protocol on two copies of a two-mode state, with ideal
//! or inefficient detectors, and the multi-step driver.
//!
//! With ideal detectors the unnormalized output is
//!
//! `ρ′_{a,b;c,d} = Σ M^{s,t;n,m}_{a,b;c,d} ρ_{s,t;n,m} ρ_{a−s,b−t;c−n,d−m}`,
//!
//! `M = 2^{−(a+b+c+d)/2} (−1)^{(a+b+c+d)−(s+t+n+m)} [C(a,s)C(b,t)C(c,n)C(d,m)]^{1/2}`,
//!
//! summed over `s ≤ a, t ≤ b, n ≤ c, m ≤ d`. An output coefficient only
//! involves input coefficients with smaller or equal indices, so truncating
//! the input at cutoff `N` gives exactly the untruncated output restricted to
//! indices `≤ N`.
//!
//! A detector of efficiency `η` accepts with the POVM element
//! `Σ_k (1−η)^k |k⟩⟨k|`; each of the `k` (ket/bra of the first mode pair)
//! and `l` (second pair) photons lost before the detector adds a layer of
//! terms weighted by `(1−η)^{k+l}`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockOperator;
use crate::gaussian::Seeds;
use crate::measures::StepMeasures;
use crate::prep::{apply_beam_splitter, condition, loss_channel_fock, BeamSplitterSpec, KrausElement};
use crate::util::{binom, map_indexed, sqrt_binom, sqrt_factorials};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default floor on the per-step success probability.
pub const P_MIN: f64 = 1e-12;

/// Weight tables for the ideal map at one cutoff.
#[derive(Debug)]
pub struct IdealMapCoefficients {
    pub cutoff: usize,
    /// `√(k!)` for `k ≤ cutoff`.
    pub sqrt_fact: Vec<f64>,
    /// `(−1)^k` for `k ≤ 4·cutoff`.
    pub sign: Vec<f64>,
    /// `2^{−k/2}` for `k ≤ 4·cutoff`.
    pub pow: Vec<f64>,
}

impl IdealMapCoefficients {
    pub fn new(cutoff: usize) -> Self {
        let n = 4 * cutoff;
        Self {
            cutoff,
            sqrt_fact: sqrt_factorials(cutoff),
            sign: (0..=n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect(),
            pow: (0..=n).map(|k| 2f64.powf(-(k as f64) / 2.0)).collect(),
        }
    }

    /// Cached tables, built once per cutoff.
    pub fn shared(cutoff: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<IdealMapCoefficients>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        cache
            .lock()
            .unwrap()
            .entry(cutoff)
            .or_insert_with(|| Arc::new(Self::new(cutoff)))
            .clone()
    }

    #[inline]
    fn sqrt_binom(&self, n: usize, k: usize) -> f64 {
        self.sqrt_fact[n] / (self.sqrt_fact[k] * self.sqrt_fact[n - k])
    }

    /// `M^{s,t;n,m}_{a,b;c,d}`; requires `s ≤ a, t ≤ b, n ≤ c, m ≤ d`.
    #[allow(clippy::too_many_arguments)]
    #[inline]
    pub fn m(&self, a: usize, b: usize, c: usize, d: usize, s: usize, t: usize, n: usize, m: usize) -> f64 {
        let total = a + b + c + d;
        self.pow[total]
            * self.sign[total - (s + t + n + m)]
            * self.sqrt_binom(a, s)
            * self.sqrt_binom(b, t)
            * self.sqrt_binom(c, n)
            * self.sqrt_binom(d, m)
    }
}

/// Weight tables for the map with detector efficiency `η`.
#[derive(Debug)]
pub struct LossyMapCoefficients {
    pub cutoff: usize,
    pub eta: f64,
    /// `(1−η)^k` for `k ≤ 2·cutoff`.
    pub weight: Vec<f64>,
    /// Per-mode amplitude `g[A][k][a]`, flattened.
    amp: Vec<f64>,
}

impl LossyMapCoefficients {
    pub fn new(cutoff: usize, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        let kmax = 2 * cutoff;
        let side = cutoff + 1;
        let mut amp = vec![0.0; side * (kmax + 1) * side];
        for big in 0..side {
            for k in 0..=kmax {
                for a in 0..=(big + k).min(cutoff) {
                    amp[(big * (kmax + 1) + k) * side + a] = mode_amplitude(big, k, a);
                }
            }
        }
        Ok(Self {
            cutoff,
            eta,
            weight: (0..=kmax).map(|k| (1.0 - eta).powi(k as i32)).collect(),
            amp,
        })
    }

    /// Cached tables, built once per `(cutoff, η)`.
    pub fn shared(cutoff: usize, eta: f64) -> Result<Arc<Self>> {
        check_eta(eta)?;
        static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<LossyMapCoefficients>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let key = (cutoff, eta.to_bits());
        if let Some(hit) = cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let fresh = Arc::new(Self::new(cutoff, eta)?);
        cache.lock().unwrap().insert(key, fresh.clone());
        Ok(fresh)
    }

    /// `g[A][k][a]`: the part of the coefficient belonging to one output
    /// index `A`, with `k` photons lost and `a` taken from the first copy.
    #[inline]
    pub fn g(&self, big: usize, k: usize, a: usize) -> f64 {
        let side = self.cutoff + 1;
        self.amp[(big * (2 * self.cutoff + 1) + k) * side + a]
    }
}

/// `2^{−(A+k)/2} Σ_s (−1)^{A−a+s} [C(a,s) C(k,s) C(A+k−a,k−s) C(A,a−s)]^{1/2}`.
fn mode_amplitude(big: usize, k: usize, a: usize) -> f64 {
    if a > big + k {
        return 0.0;
    }
    let lo = a.saturating_sub(big);
    let hi = a.min(k);
    let mut acc = 0.0;
    for s in lo..=hi {
        let sign = if (big + s + a).is_multiple_of(2) { 1.0 } else { -1.0 };
        acc += sign * (sqrt_binom(a, s) * sqrt_binom(k, s) * sqrt_binom(big + k - a, k - s) * sqrt_binom(big, a - s));
    }
    acc * 2f64.powf(-((big + k) as f64) / 2.0)
}

/// The full coefficient `N^{a,b,c,d,s,u,s′,u′}_{A,B,C,D}` with `k, l` lost
/// photons, evaluated term by term. Used to check the factorized tables.
#[allow(clippy::too_many_arguments)]
pub fn n_coefficient(out: [usize; 4], k: usize, l: usize, inp: [usize; 4], inner: [usize; 4], eta: f64) -> f64 {
    let [big_a, big_b, big_c, big_d] = out;
    let [a, b, c, d] = inp;
    let [s, u, s2, u2] = inner;
    let bracket = |big: usize, x: usize, kk: usize, y: usize| -> Option<f64> {
        if y > x || y > kk || x > big + kk || x - y > big {
            return None;
        }
        Some((binom(x, y) * binom(kk, y) * binom(big + kk - x, kk - y) * binom(big, x - y)).sqrt())
    };
    let parts = [
        bracket(big_a, a, k, s),
        bracket(big_b, b, l, u),
        bracket(big_c, c, k, s2),
        bracket(big_d, d, l, u2),
    ];
    if parts.iter().any(Option::is_none) {
        return 0.0;
    }
    let exponent = (big_a + big_b + big_c + big_d + s + u + s2 + u2) as i64 - (a + b + c + d) as i64;
    let sign = if exponent.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let total = (big_a + big_b + big_c + big_d + 2 * k + 2 * l) as f64;
    let w = if k + l == 0 {
        1.0
    } else {
        (1.0 - eta).powi((k + l) as i32)
    };
    parts.iter().map(|p| p.unwrap()).product::<f64>() * sign * w * 2f64.powf(-total / 2.0)
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "eta",
            value: eta,
            domain: "[0, 1]",
        })
    }
}

fn check_input(rho: &FockOperator) -> Result<()> {
    rho.require_modes(2)?;
    rho.require_hermitian()?;
    if rho.cutoff() < 1 {
        return Err(Error::OutOfRange {
            name: "cutoff",
            value: rho.cutoff() as f64,
            domain: "[1, ∞)",
        });
    }
    Ok(())
}

/// Largest photon number appearing in any nonzero coefficient.
fn support(rho: &FockOperator) -> usize {
    let side = rho.side();
    let dim = rho.dim();
    let mut best = 0;
    for (i, z) in rho.coeffs().iter().enumerate() {
        if *z != ZERO {
            let (k, b) = (i / dim, i % dim);
            best = best.max(k / side).max(k % side).max(b / side).max(b % side);
        }
    }
    best
}

/// Fill the upper triangle `ket ≤ bra` with `entry(a, b, c, d)` for indices
/// up to `lim`, mirror it, and force a real diagonal.
fn assemble<F>(cutoff: usize, lim: usize, entry: F) -> FockOperator
where
    F: Fn(usize, usize, usize, usize) -> Complex64 + Sync + Send,
{
    let side = cutoff + 1;
    let dim = side * side;
    let rows = map_indexed(dim, |ket| {
        let (a, b) = (ket / side, ket % side);
        let mut row = vec![ZERO; dim - ket];
        if a > lim || b > lim {
            return row;
        }
        for bra in ket..dim {
            let (c, d) = (bra / side, bra % side);
            if c <= lim && d <= lim {
                row[bra - ket] = entry(a, b, c, d);
            }
        }
        row
    });
    let mut out = vec![ZERO; dim * dim];
    for (ket, row) in rows.into_iter().enumerate() {
        for (off, z) in row.into_iter().enumerate() {
            let bra = ket + off;
            if off == 0 {
                out[ket * dim + ket] = Complex64::new(z.re, 0.0);
            } else {
                out[ket * dim + bra] = z;
                out[bra * dim + ket] = z.conj();
            }
        }
    }
    FockOperator::from_raw(2, cutoff, out, true)
}

/// Direct evaluation of the ideal map (unnormalized). Terms are summed in a
/// fixed order, bra indices outermost, so the result does not depend on the
/// number of threads.
pub fn ideal_step(rho: &FockOperator) -> Result<FockOperator> {
    check_input(rho)?;
    let cutoff = rho.cutoff();
    let coef = IdealMapCoefficients::shared(cutoff);
    let sup = support(rho);
    let side = cutoff + 1;
    let dim = side * side;
    let src = rho.coeffs();
    let at = |s: usize, t: usize, n: usize, m: usize| src[(s * side + t) * dim + n * side + m];
    Ok(assemble(cutoff, (2 * sup).min(cutoff), |a, b, c, d| {
        let mut acc = ZERO;
        for n in c.saturating_sub(sup)..=c.min(sup) {
            for m in d.saturating_sub(sup)..=d.min(sup) {
                for s in a.saturating_sub(sup)..=a.min(sup) {
                    for t in b.saturating_sub(sup)..=b.min(sup) {
                        let w = coef.m(a, b, c, d, s, t, n, m);
                        acc += at(s, t, n, m) * at(a - s, b - t, c - n, d - m) * w;
                    }
                }
            }
        }
        acc
    }))
}

/// The ideal map as a four-index convolution. With
/// `u = ρ_{stnm} 2^{−(s+t+n+m)/2}/√(s!t!n!m!)` and `v = (−1)^{s+t+n+m} u`,
/// `ρ′_{abcd} = √(a!b!c!d!) (u ∗ v)_{abcd}`.
pub fn ideal_step_fast(rho: &FockOperator) -> Result<FockOperator> {
    check_input(rho)?;
    let cutoff = rho.cutoff();
    let coef = IdealMapCoefficients::shared(cutoff);
    let sup = support(rho);
    let side = cutoff + 1;
    let dim = side * side;
    let w: Vec<f64> = (0..side).map(|k| coef.pow[k] / coef.sqrt_fact[k]).collect();
    let mut u = vec![ZERO; dim * dim];
    let mut v = vec![ZERO; dim * dim];
    for (i, (&z, (ui, vi))) in rho.coeffs().iter().zip(u.iter_mut().zip(v.iter_mut())).enumerate() {
        let (s, t, n, m) = (i / (side * dim), (i / dim) % side, (i / side) % side, i % side);
        let x = z * (w[s] * w[t] * w[n] * w[m]);
        *ui = x;
        *vi = x * coef.sign[s + t + n + m];
    }
    let sf = &coef.sqrt_fact;
    Ok(assemble(cutoff, (2 * sup).min(cutoff), |a, b, c, d| {
        let mut acc = ZERO;
        for s in a.saturating_sub(sup)..=a.min(sup) {
            for t in b.saturating_sub(sup)..=b.min(sup) {
                for n in c.saturating_sub(sup)..=c.min(sup) {
                    let ub = ((s * side + t) * side + n) * side;
                    let vb = (((a - s) * side + (b - t)) * side + (c - n)) * side;
                    let (lo, hi) = (d.saturating_sub(sup), d.min(sup));
                    let us = &u[ub + lo..=ub + hi];
                    let vs = &v[vb + d - hi..=vb + d - lo];
                    for (x, y) in us.iter().zip(vs.iter().rev()) {
                        acc += x * y;
                    }
                }
            }
        }
        acc * (sf[a] * sf[b] * sf[c] * sf[d])
    }))
}

/// The map with detector efficiency `η` (unnormalized). The loss sums run
/// as far as the truncated input allows, so only input coefficients beyond
/// the cutoff are missing; their weight is bounded by the input's
/// boundary-shell weight.
pub fn lossy_step(rho: &FockOperator, eta: f64) -> Result<FockOperator> {
    check_eta(eta)?;
    check_input(rho)?;
    let cutoff = rho.cutoff();
    let coef = LossyMapCoefficients::shared(cutoff, eta)?;
    let sup = support(rho);
    let side = cutoff + 1;
    let dim = side * side;
    let src = rho.coeffs();
    let at = |s: usize, t: usize, n: usize, m: usize| src[(s * side + t) * dim + n * side + m];
    let span = 2 * sup;
    let live_k: Vec<usize> = (0..=span).filter(|&k| coef.weight[k] != 0.0).collect();
    Ok(assemble(cutoff, span.min(cutoff), |big_a, big_b, big_c, big_d| {
        let mut acc = ZERO;
        for &k in live_k.iter().filter(|&&k| k + big_a.max(big_c) <= span) {
            let (ak, ck) = (big_a + k, big_c + k);
            for a in ak.saturating_sub(sup)..=ak.min(sup) {
                let ga = coef.g(big_a, k, a) * coef.weight[k];
                if ga == 0.0 {
                    continue;
                }
                for c in ck.saturating_sub(sup)..=ck.min(sup) {
                    let gac = ga * coef.g(big_c, k, c);
                    if gac == 0.0 {
                        continue;
                    }
                    for &l in live_k.iter().filter(|&&l| l + big_b.max(big_d) <= span) {
                        let (bl, dl) = (big_b + l, big_d + l);
                        let gl = gac * coef.weight[l];
                        for b in bl.saturating_sub(sup)..=bl.min(sup) {
                            let gb = gl * coef.g(big_b, l, b);
                            if gb == 0.0 {
                                continue;
                            }
                            for d in dl.saturating_sub(sup)..=dl.min(sup) {
                                let wt = gb * coef.g(big_d, l, d);
                                acc += at(a, b, c, d) * at(ak - a, bl - b, ck - c, dl - d) * wt;
                            }
                        }
                    }
                }
            }
        }
        acc
    }))
}

/// Largest cutoff accepted by [`lossy_step_oracle`].
pub const ORACLE_MAX_CUTOFF: usize = 5;

/// Reference for [`lossy_step`] composed from the linear-optics primitives:
/// a 50:50 splitter on each mode pair of `ρ⊗ρ`, loss of amplitude
/// transmittance `√η` on the detector mode, and vacuum conditioning.
///
/// Since `ρ⊗ρ` is a sum of products `|a₁,a₂⟩⟨c₁,c₂| ⊗ |b₁,b₂⟩⟨d₁,d₂|` over
/// the two mode pairs and the channel acts on each pair separately, the
/// pair channel is tabulated on basis operators at cutoff `2N` (so no photon
/// is lost to truncation) and contracted pair by pair.
pub fn lossy_step_oracle(rho: &FockOperator, eta: f64) -> Result<FockOperator> {
    check_eta(eta)?;
    check_input(rho)?;
    let cutoff = rho.cutoff();
    if cutoff > ORACLE_MAX_CUTOFF {
        return Err(Error::ResourceGuard {
            what: "compositional lossy map",
            cutoff,
            max: ORACLE_MAX_CUTOFF,
        });
    }
    let side = cutoff + 1;
    let big = 2 * cutoff;
    let spec = BeamSplitterSpec::balanced(0, 1);
    let theta = eta.sqrt();
    // kraus[((x1 * side + x2) * side + y1) * side + y2][A * side + C]
    let mut chan = vec![vec![ZERO; side * side]; side.pow(4)];
    for x1 in 0..side {
        for x2 in 0..side {
            for y1 in 0..side {
                for y2 in 0..side {
                    let mut op = FockOperator::zeros(2, big)?;
                    op.set(&[x1, x2], &[y1, y2], Complex64::new(1.0, 0.0))?;
                    let mixed = apply_beam_splitter(&op, &spec)?;
                    let lossy = loss_channel_fock(&mixed, 0, theta)?;
                    let kept = condition(&lossy, KrausElement::Vacuum, 0)?;
                    let slot = &mut chan[((x1 * side + x2) * side + y1) * side + y2];
                    for ka in 0..side {
                        for kc in 0..side {
                            slot[ka * side + kc] = kept.get(&[ka], &[kc]);
                        }
                    }
                }
            }
        }
    }
    let dim = side * side;
    let src = rho.coeffs();
    let at = |s: usize, t: usize, n: usize, m: usize| src[(s * side + t) * dim + n * side + m];
    // Stage one: contract the first mode pair.
    // half[(A, C)][(b1, d1, b2, d2)]
    let q = side.pow(4);
    let mut half = vec![ZERO; side * side * q];
    for a1 in 0..side {
        for a2 in 0..side {
            for c1 in 0..side {
                for c2 in 0..side {
                    let kr = &chan[((a1 * side + a2) * side + c1) * side + c2];
                    for (ac, &kv) in kr.iter().enumerate() {
                        if kv == ZERO {
                            continue;
                        }
                        let dst = &mut half[ac * q..(ac + 1) * q];
                        for b1 in 0..side {
                            for d1 in 0..side {
                                let x = at(a1, b1, c1, d1) * kv;
                                for b2 in 0..side {
                                    for d2 in 0..side {
                                        dst[((b1 * side + d1) * side + b2) * side + d2] += x * at(a2, b2, c2, d2);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    // Stage two: the second mode pair.
    let mut out = FockOperator::zeros(2, cutoff)?;
    for big_a in 0..side {
        for big_c in 0..side {
            let h = &half[(big_a * side + big_c) * q..(big_a * side + big_c + 1) * q];
            for big_b in 0..side {
                for big_d in 0..side {
                    let mut acc = ZERO;
                    for b1 in 0..side {
                        for b2 in 0..side {
                            for d1 in 0..side {
                                for d2 in 0..side {
                                    let kv = chan[((b1 * side + b2) * side + d1) * side + d2][big_b * side + big_d];
                                    acc += kv * h[((b1 * side + d1) * side + b2) * side + d2];
                                }
                            }
                        }
                    }
                    out.set(&[big_a, big_b], &[big_c, big_d], acc)?;
                }
            }
        }
    }
    out.hermitize();
    Ok(out)
}

/// Which implementation of the ideal map [`iterate`] uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// Term-by-term sums in fixed order.
    #[default]
    Direct,
    /// Convolution form.
    Fast,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterateOptions {
    pub steps: usize,
    pub eta: f64,
    pub kernel: Kernel,
    pub p_min: f64,
}

impl Default for IterateOptions {
    fn default() -> Self {
        Self {
            steps: 1,
            eta: 1.0,
            kernel: Kernel::Direct,
            p_min: P_MIN,
        }
    }
}

/// Per-step log.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub step: usize,
    /// Trace of the unnormalized output of this step (1 for step 0).
    pub probability: f64,
    /// Product of the per-step probabilities so far.
    pub cumulative: f64,
    /// `None` when `ρ₀₀₀₀` vanishes.
    pub seeds: Option<Seeds>,
    pub boundary_weight: f64,
    pub measures: Option<StepMeasures>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Completed,
    /// Success probability at `step` fell to or below the floor; the
    /// trajectory holds the states up to the previous step.
    Aborted {
        step: usize,
        probability: f64,
    },
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Normalized `ρ⁽ⁱ⁾`, starting with the input.
    pub states: Vec<FockOperator>,
    pub records: Vec<IterationRecord>,
    pub status: Status,
}

impl Trajectory {
    pub fn last(&self) -> &FockOperator {
        self.states.last().expect("trajectory holds the input state")
    }

    /// The abort as an error, for callers that treat it as one.
    pub fn into_result(self, p_min: f64) -> Result<Self> {
        match self.status {
            Status::Completed => Ok(self),
            Status::Aborted { step, probability } => Err(Error::VanishingProbability {
                step,
                probability,
                floor: p_min,
            }),
        }
    }
}

/// One step with the selected kernel and efficiency.
pub fn step(rho: &FockOperator, eta: f64, kernel: Kernel) -> Result<FockOperator> {
    if eta == 1.0 {
        match kernel {
            Kernel::Direct => ideal_step(rho),
            Kernel::Fast => ideal_step_fast(rho),
        }
    } else {
        lossy_step(rho, eta)
    }
}

fn record(step: usize, probability: f64, cumulative: f64, rho: &FockOperator) -> IterationRecord {
    IterationRecord {
        step,
        probability,
        cumulative,
        seeds: Seeds::of(rho).ok(),
        boundary_weight: rho.check_truncation(),
        measures: None,
    }
}

/// `ρ⁽ⁱ⁺¹⁾ ∝ E(ρ⁽ⁱ⁾ ⊗ ρ⁽ⁱ⁾)` for `opts.steps` steps.
pub fn iterate(rho0: &FockOperator, opts: &IterateOptions) -> Result<Trajectory> {
    check_eta(opts.eta)?;
    check_input(rho0)?;
    let tr = rho0.trace().re;
    if (tr - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { trace: tr });
    }
    let mut states = vec![rho0.clone()];
    let mut records = vec![record(0, 1.0, 1.0, rho0)];
    let mut cumulative = 1.0;
    for i in 1..=opts.steps {
        let raw = step(states.last().unwrap(), opts.eta, opts.kernel)?;
        let p = raw.trace().re;
        if !(p > opts.p_min) {
            log::warn!("success probability {p:.3e} at step {i} below floor {:.1e}", opts.p_min);
            return Ok(Trajectory {
                states,
                records,
                status: Status::Aborted {
                    step: i,
                    probability: p,
                },
            });
        }
        cumulative *= p;
        let next = raw.scaled(1.0 / p);
        records.push(record(i, p, cumulative, &next));
        states.push(next);
    }
    Ok(Trajectory {
        states,
        records,
        status: Status::Completed,
    })
}
