//! Figures of merit evaluated on Fock-space states.
//!
//! Wigner functions use the phase-space coordinates `q, p` of
//! `X = (a+a†)/√2` and `P = (a−a†)/(i√2)`, so the vacuum is
//! `W(q,p) = e^{−(q²+p²)}/π`. The Fock kernel of `|m⟩⟨n|`, `m ≥ n`, at
//! `α = (q+ip)/√2` is
//! `(2/π)(−1)ⁿ √(n!/m!) (2α*)^{m−n} e^{−2|α|²} L_n^{(m−n)}(4|α|²)`,
//! halved for the `dq dp` measure.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockOperator, Tolerances};
use crate::gaussian::{covariance_from_fock, squeezing_es, squeezing_ets};
use crate::util::{map_indexed, sqrt_factorials};

/// Eigenvalues below this are dropped from the entropy sum.
pub const ENTROPY_CLIP: f64 = 1e-14;

fn normalized_trace(rho: &FockOperator) -> Result<f64> {
    let tr = rho.trace().re;
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::ZeroTrace { trace: tr });
    }
    Ok(tr)
}

/// `log₂ ‖ρ^Γ‖₁` in bits. The trace norm is divided by `tr ρ`, so a
/// truncated state is measured as its renormalized self.
pub fn log_negativity(rho: &FockOperator) -> Result<f64> {
    rho.require_modes(2)?;
    let tr = normalized_trace(rho)?;
    let norm = rho.partial_transpose()?.trace_norm()?;
    Ok((norm / tr).log2())
}

/// `−tr[ρ log₂ ρ]` of `ρ/tr ρ`, in bits.
pub fn von_neumann_entropy(rho: &FockOperator) -> Result<f64> {
    von_neumann_entropy_with(rho, &Tolerances::default())
}

pub fn von_neumann_entropy_with(rho: &FockOperator, tol: &Tolerances) -> Result<f64> {
    let tr = normalized_trace(rho)?;
    let ev = rho.eigenvalues()?;
    let min = ev.last().copied().unwrap_or(0.0) / tr;
    if min < -tol.pos {
        return Err(Error::NegativeEigenvalue { value: min });
    }
    Ok(ev
        .iter()
        .map(|&l| l / tr)
        .filter(|&l| l > ENTROPY_CLIP)
        .map(|l| -l * l.log2())
        .sum::<f64>()
        .max(0.0))
}

/// `½‖a − b‖₁`.
pub fn trace_distance(a: &FockOperator, b: &FockOperator) -> Result<f64> {
    Ok(0.5 * a.sub(b)?.trace_norm()?)
}

/// Measures attached to one iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMeasures {
    /// Bits.
    pub log_negativity: f64,
    /// Bits.
    pub entropy: f64,
    pub purity: f64,
    /// Nats, from the state's covariance matrix.
    pub squeezing_es: f64,
    /// Nats, from the standard form of the covariance matrix.
    pub squeezing_ets: f64,
}

pub fn step_measures(rho: &FockOperator) -> Result<StepMeasures> {
    let tr = normalized_trace(rho)?;
    let gamma = covariance_from_fock(rho)?;
    Ok(StepMeasures {
        log_negativity: log_negativity(rho)?,
        entropy: von_neumann_entropy(rho)?,
        purity: rho.purity() / (tr * tr),
        squeezing_es: squeezing_es(&gamma),
        squeezing_ets: squeezing_ets(&gamma)?,
    })
}

/// Fill in `measures` for every record of a trajectory.
pub fn attach_measures(traj: &mut crate::distill::Trajectory) -> Result<()> {
    for (rec, rho) in traj.records.iter_mut().zip(&traj.states) {
        rec.measures = Some(step_measures(rho)?);
    }
    Ok(())
}

/// Axis ranges and sample counts of a Wigner grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nq: usize,
    pub np: usize,
}

impl Default for WignerSpec {
    fn default() -> Self {
        Self::square(6.0, 201)
    }
}

impl WignerSpec {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self {
            q_min: -half_width,
            q_max: half_width,
            p_min: -half_width,
            p_max: half_width,
            nq: n,
            np: n,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.nq >= 2
            && self.np >= 2
            && self.q_max > self.q_min
            && self.p_max > self.p_min
            && [self.q_min, self.q_max, self.p_min, self.p_max]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!("{self:?}")))
        }
    }

    pub fn q(&self, i: usize) -> f64 {
        self.q_min + (self.q_max - self.q_min) * i as f64 / (self.nq - 1) as f64
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + (self.p_max - self.p_min) * j as f64 / (self.np - 1) as f64
    }
}

/// Wigner function samples, `values[i * np + j] = W(q_i, p_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub spec: WignerSpec,
    pub values: Vec<f64>,
}

/// Normalization residual above which a grid is reported as too coarse.
pub const NORMALIZATION_WARN: f64 = 1e-2;

impl WignerGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.np + j]
    }

    fn trapezoid(&self, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let s = &self.spec;
        let dq = (s.q_max - s.q_min) / (s.nq - 1) as f64;
        let dp = (s.p_max - s.p_min) / (s.np - 1) as f64;
        let mut acc = 0.0;
        for i in 0..s.nq {
            let wq = if i == 0 || i == s.nq - 1 { 0.5 } else { 1.0 };
            for j in 0..s.np {
                let wp = if j == 0 || j == s.np - 1 { 0.5 } else { 1.0 };
                acc += wq * wp * f(s.q(i), s.p(j), self.at(i, j));
            }
        }
        acc * dq * dp
    }

    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        self.trapezoid(|_, _, w| w)
    }

    /// `(∫ q W, ∫ p W)`.
    pub fn first_moments(&self) -> (f64, f64) {
        (self.trapezoid(|q, _, w| q * w), self.trapezoid(|_, p, w| p * w))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether the function dips below zero anywhere on the grid.
    pub fn has_negative_region(&self) -> bool {
        self.min() < -1e-12
    }

    /// Excess kurtosis of the `q` and `p` marginals; both vanish for a
    /// Gaussian.
    pub fn excess_kurtosis(&self) -> (f64, f64) {
        let norm = self.integral();
        let (mq, mp) = self.first_moments();
        let (mq, mp) = (mq / norm, mp / norm);
        let kurt = |pick: &dyn Fn(f64, f64) -> f64, mean: f64| {
            let m2 = self.trapezoid(|q, p, w| (pick(q, p) - mean).powi(2) * w) / norm;
            let m4 = self.trapezoid(|q, p, w| (pick(q, p) - mean).powi(4) * w) / norm;
            m4 / (m2 * m2) - 3.0
        };
        (kurt(&|q, _| q, mq), kurt(&|_, p| p, mp))
    }

    /// Flags a non-Gaussian profile through the marginal kurtosis.
    pub fn kurtosis_flag(&self) -> bool {
        let (kq, kp) = self.excess_kurtosis();
        kq.abs() > 1e-3 || kp.abs() > 1e-3
    }

    /// `L²` distance on the grid between `W` and the Gaussian with the same
    /// first and second moments.
    pub fn gaussian_fit_residual(&self) -> f64 {
        let norm = self.integral();
        let (mq, mp) = self.first_moments();
        let (mq, mp) = (mq / norm, mp / norm);
        let vqq = self.trapezoid(|q, _, w| (q - mq).powi(2) * w) / norm;
        let vpp = self.trapezoid(|_, p, w| (p - mp).powi(2) * w) / norm;
        let vqp = self.trapezoid(|q, p, w| (q - mq) * (p - mp) * w) / norm;
        let det = vqq * vpp - vqp * vqp;
        let gauss = |q: f64, p: f64| {
            let (x, y) = (q - mq, p - mp);
            let quad = (vpp * x * x - 2.0 * vqp * x * y + vqq * y * y) / det;
            norm * (-0.5 * quad).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
        };
        self.trapezoid(|q, p, w| (w - gauss(q, p)).powi(2)).sqrt()
    }

    /// `(q, p, W)` triples in storage order.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let s = self.spec;
        (0..s.nq).flat_map(move |i| (0..s.np).map(move |j| (s.q(i), s.p(j), self.at(i, j))))
    }
}

/// `L_n^{(k)}(x)` for `n = 0..=nmax`.
fn laguerre_column(nmax: usize, k: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(1.0);
    if nmax >= 1 {
        out.push(1.0 + k as f64 - x);
    }
    for j in 1..nmax {
        let next = ((2 * j + 1 + k) as f64 - x) * out[j] - (j + k) as f64 * out[j - 1];
        out.push(next / (j + 1) as f64);
    }
    out
}

/// `W(q, p)` of a single-mode operator at one phase-space point.
pub fn wigner_point(rho: &FockOperator, q: f64, p: f64) -> f64 {
    let n = rho.cutoff();
    let side = n + 1;
    let sf = sqrt_factorials(n);
    let alpha = Complex64::new(q, p) / std::f64::consts::SQRT_2;
    let r2 = alpha.norm_sqr();
    let gauss = (-2.0 * r2).exp();
    let two_conj = alpha.conj() * 2.0;
    let c = rho.coeffs();
    let mut acc = 0.0;
    let mut pow = Complex64::new(1.0, 0.0);
    for k in 0..=n {
        let lag = laguerre_column(n - k, k, 4.0 * r2);
        for (nn, l) in lag.iter().enumerate() {
            let m = nn + k;
            let sign = if nn % 2 == 0 { 1.0 } else { -1.0 };
            let kernel = pow * (sign * sf[nn] / sf[m] * l);
            // ρ_{mn} W_{|m⟩⟨n|} + ρ_{nm} W_{|n⟩⟨m|}, and W_{|n⟩⟨m|} = conj(W_{|m⟩⟨n|})
            let z = if k == 0 {
                (c[m * side + nn] * kernel).re
            } else {
                2.0 * (c[m * side + nn] * kernel).re
            };
            acc += z;
        }
        pow *= two_conj;
    }
    acc * gauss / std::f64::consts::PI
}

/// Sample the Wigner function of a single-mode state on a grid.
pub fn wigner_single_mode(rho: &FockOperator, spec: &WignerSpec) -> Result<WignerGrid> {
    rho.require_modes(1)?;
    rho.require_hermitian()?;
    spec.validate()?;
    let columns = map_indexed(spec.nq, |i| {
        let q = spec.q(i);
        (0..spec.np)
            .map(|j| wigner_point(rho, q, spec.p(j)))
            .collect::<Vec<_>>()
    });
    let grid = WignerGrid {
        spec: *spec,
        values: columns.into_iter().flatten().collect(),
    };
    let residual = (grid.integral() - rho.trace().re).abs();
    if residual > NORMALIZATION_WARN {
        log::warn!("Wigner grid normalization off by {residual:.3e}; grid too coarse or too narrow");
    }
    Ok(grid)
}
