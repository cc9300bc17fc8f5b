//! Dense operators on the truncated Fock space of one to four bosonic modes.
//!
//! An operator on `modes` modes with photon-number cutoff `N` lives on a
//! space of dimension `(N + 1)^modes`. Coefficients are stored row-major over
//! `(ket multi-index, bra multi-index)`, with the first mode most significant,
//! so for two modes entry `[s, t; n, m]` is the coefficient of `|s,t⟩⟨n,m|`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Weight on the truncation boundary above which operations log a warning.
pub const BOUNDARY_WARN: f64 = 1e-6;

/// Numerical tolerances shared by the spectral routines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Smallest eigenvalue still accepted as "positive".
    pub pos: f64,
    /// Max-norm reconstruction error of a spectral decomposition.
    pub spec: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pos: 1e-10,
            spec: 1e-10,
        }
    }
}

/// Truncated operator in the number basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator {
    modes: usize,
    cutoff: usize,
    coeffs: Vec<Complex64>,
    hermitian: bool,
}

/// Eigen-decomposition of a Hermitian operator, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<Complex64>,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lam);
        }
        scaled * v.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

impl FockOperator {
    /// The zero operator.
    pub fn zeros(modes: usize, cutoff: usize) -> Result<Self> {
        if !(1..=4).contains(&modes) {
            return Err(Error::UnsupportedModes(modes));
        }
        let dim = (cutoff + 1).pow(modes as u32);
        Ok(Self {
            modes,
            cutoff,
            coeffs: vec![ZERO; dim * dim],
            hermitian: true,
        })
    }

    /// Wrap a row-major coefficient array. The Hermitian flag is set only if
    /// the data is exactly Hermitian.
    pub fn from_coeffs(modes: usize, cutoff: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let mut op = Self::zeros(modes, cutoff)?;
        if coeffs.len() != op.coeffs.len() {
            return Err(Error::CoeffLength {
                expected: op.coeffs.len(),
                actual: coeffs.len(),
            });
        }
        op.coeffs = coeffs;
        op.hermitian = op.hermitian_residual() == 0.0;
        Ok(op)
    }

    pub fn from_matrix(modes: usize, cutoff: usize, m: &DMatrix<Complex64>) -> Result<Self> {
        let mut op = Self::zeros(modes, cutoff)?;
        let dim = op.dim();
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::ShapeMismatch {
                left: format!("{dim}x{dim}"),
                right: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        for r in 0..dim {
            for c in 0..dim {
                op.coeffs[r * dim + c] = m[(r, c)];
            }
        }
        op.hermitian = op.hermitian_residual() == 0.0;
        Ok(op)
    }

    /// `|ψ⟩⟨ψ|` for an amplitude vector over the flattened ket index.
    pub fn from_pure(modes: usize, cutoff: usize, amplitudes: &[Complex64]) -> Result<Self> {
        let mut op = Self::zeros(modes, cutoff)?;
        let dim = op.dim();
        if amplitudes.len() != dim {
            return Err(Error::CoeffLength {
                expected: dim,
                actual: amplitudes.len(),
            });
        }
        for r in 0..dim {
            for c in 0..dim {
                op.coeffs[r * dim + c] = amplitudes[r] * amplitudes[c].conj();
            }
        }
        op.hermitian = true;
        Ok(op)
    }

    /// `|k⟩⟨k|` for a number-state multi-index `k`.
    pub fn projector(modes: usize, cutoff: usize, ket: &[usize]) -> Result<Self> {
        let mut op = Self::zeros(modes, cutoff)?;
        let k = op.flat(ket)?;
        let dim = op.dim();
        op.coeffs[k * dim + k] = Complex64::new(1.0, 0.0);
        Ok(op)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Number of levels per mode, `cutoff + 1`.
    pub fn side(&self) -> usize {
        self.cutoff + 1
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.side().pow(self.modes as u32)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_marked_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Flatten a multi-index, validating its length and range.
    pub fn flat(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.modes {
            return Err(Error::ModeCount {
                expected: self.modes,
                actual: idx.len(),
            });
        }
        let side = self.side();
        let mut k = 0;
        for &i in idx {
            if i > self.cutoff {
                return Err(Error::OutOfRange {
                    name: "photon number",
                    value: i as f64,
                    domain: "[0, cutoff]",
                });
            }
            k = k * side + i;
        }
        Ok(k)
    }

    /// Inverse of [`flat`](Self::flat).
    pub fn unflat(&self, mut k: usize) -> Vec<usize> {
        let side = self.side();
        let mut idx = vec![0; self.modes];
        for slot in idx.iter_mut().rev() {
            *slot = k % side;
            k /= side;
        }
        idx
    }

    pub fn get(&self, ket: &[usize], bra: &[usize]) -> Complex64 {
        let (k, b) = (self.flat(ket), self.flat(bra));
        match (k, b) {
            (Ok(k), Ok(b)) => self.coeffs[k * self.dim() + b],
            _ => ZERO,
        }
    }

    /// Two-mode shorthand for the coefficient of `|s,t⟩⟨n,m|`; zero outside
    /// the cutoff.
    #[inline]
    pub fn get2(&self, s: usize, t: usize, n: usize, m: usize) -> Complex64 {
        debug_assert_eq!(self.modes, 2);
        let c = self.cutoff;
        if s > c || t > c || n > c || m > c {
            return ZERO;
        }
        let side = self.side();
        self.coeffs[((s * side + t) * side + n) * side + m]
    }

    /// Set one coefficient. Clears the Hermitian flag.
    pub fn set(&mut self, ket: &[usize], bra: &[usize], value: Complex64) -> Result<()> {
        let k = self.flat(ket)?;
        let b = self.flat(bra)?;
        let dim = self.dim();
        self.coeffs[k * dim + b] = value;
        self.hermitian = false;
        Ok(())
    }

    /// Set a coefficient and its Hermitian partner. Keeps the flag when the
    /// operator was Hermitian before (diagonal values are forced real).
    pub fn set_hermitian(&mut self, ket: &[usize], bra: &[usize], value: Complex64) -> Result<()> {
        let k = self.flat(ket)?;
        let b = self.flat(bra)?;
        let dim = self.dim();
        if k == b {
            self.coeffs[k * dim + k] = Complex64::new(value.re, 0.0);
        } else {
            self.coeffs[k * dim + b] = value;
            self.coeffs[b * dim + k] = value.conj();
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        self.hermitian = false;
        &mut self.coeffs
    }

    pub(crate) fn from_raw(modes: usize, cutoff: usize, coeffs: Vec<Complex64>, hermitian: bool) -> Self {
        debug_assert_eq!(coeffs.len(), (cutoff + 1).pow(2 * modes as u32));
        Self {
            modes,
            cutoff,
            coeffs,
            hermitian,
        }
    }

    /// Largest `|A_kb − conj(A_bk)|`.
    pub fn hermitian_residual(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0_f64;
        for r in 0..dim {
            for c in r..dim {
                let d = (self.coeffs[r * dim + c] - self.coeffs[c * dim + r].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Replace by `(A + A†)/2` and mark Hermitian.
    pub fn hermitize(&mut self) {
        let dim = self.dim();
        for r in 0..dim {
            for c in r..dim {
                let avg = 0.5 * (self.coeffs[r * dim + c] + self.coeffs[c * dim + r].conj());
                self.coeffs[r * dim + c] = avg;
                self.coeffs[c * dim + r] = avg.conj();
            }
        }
        self.hermitian = true;
    }

    pub(crate) fn require_hermitian(&self) -> Result<()> {
        if self.hermitian {
            return Ok(());
        }
        let residual = self.hermitian_residual();
        if residual == 0.0 {
            Ok(())
        } else {
            Err(Error::NotHermitian { residual })
        }
    }

    pub(crate) fn require_modes(&self, expected: usize) -> Result<()> {
        if self.modes == expected {
            Ok(())
        } else {
            Err(Error::ModeCount {
                expected,
                actual: self.modes,
            })
        }
    }

    pub(crate) fn require_same_shape(&self, other: &Self) -> Result<()> {
        if self.modes == other.modes && self.cutoff == other.cutoff {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left: format!("{} modes, cutoff {}", self.modes, self.cutoff),
                right: format!("{} modes, cutoff {}", other.modes, other.cutoff),
            })
        }
    }

    /// Sum of the diagonal.
    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|k| self.coeffs[k * dim + k]).sum()
    }

    /// Divide by the (real part of the) trace.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::ZeroTrace { trace: tr });
        }
        Ok(self.scaled(1.0 / tr))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            modes: self.modes,
            cutoff: self.cutoff,
            coeffs: self.coeffs.iter().map(|&z| z * factor).collect(),
            hermitian: self.hermitian,
        }
    }

    /// `self − other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.require_same_shape(other)?;
        Ok(Self {
            modes: self.modes,
            cutoff: self.cutoff,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
            hermitian: self.hermitian && other.hermitian,
        })
    }

    /// `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.require_same_shape(other)?;
        Ok(Self {
            modes: self.modes,
            cutoff: self.cutoff,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
            hermitian: self.hermitian && other.hermitian,
        })
    }

    /// Max-norm distance between coefficient arrays.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.require_same_shape(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Probability mass on number states with any mode at the cutoff.
    pub fn boundary_weight(&self) -> f64 {
        let dim = self.dim();
        let mut w = 0.0;
        for k in 0..dim {
            if self.unflat(k).contains(&self.cutoff) {
                w += self.coeffs[k * dim + k].re;
            }
        }
        w
    }

    /// Boundary weight, with a log warning above [`BOUNDARY_WARN`] relative
    /// to the trace.
    pub fn check_truncation(&self) -> f64 {
        let w = self.boundary_weight();
        let tr = self.trace().re.abs().max(f64::MIN_POSITIVE);
        if w / tr > BOUNDARY_WARN {
            log::warn!(
                "boundary-shell weight {:.3e} at cutoff {} exceeds {:.0e}",
                w / tr,
                self.cutoff,
                BOUNDARY_WARN
            );
        }
        w
    }

    pub fn matrix(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        DMatrix::from_row_slice(dim, dim, &self.coeffs)
    }

    /// Tensor product; the modes of `other` are appended after those of `self`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.cutoff != other.cutoff {
            return Err(Error::ShapeMismatch {
                left: format!("cutoff {}", self.cutoff),
                right: format!("cutoff {}", other.cutoff),
            });
        }
        let modes = self.modes + other.modes;
        let mut out = Self::zeros(modes, self.cutoff)?;
        let (d1, d2) = (self.dim(), other.dim());
        let dim = d1 * d2;
        for k1 in 0..d1 {
            for b1 in 0..d1 {
                let x = self.coeffs[k1 * d1 + b1];
                if x == ZERO {
                    continue;
                }
                for k2 in 0..d2 {
                    let row = (k1 * d2 + k2) * dim + b1 * d2;
                    let src = &other.coeffs[k2 * d2..(k2 + 1) * d2];
                    for (dst, &y) in out.coeffs[row..row + d2].iter_mut().zip(src) {
                        *dst = x * y;
                    }
                }
            }
        }
        out.hermitian = self.hermitian && other.hermitian;
        Ok(out)
    }

    /// Same operator embedded in (or truncated to) a different cutoff.
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let mut out = Self::zeros(self.modes, cutoff).expect("mode count already validated");
        let dim = out.dim();
        let keep = cutoff.min(self.cutoff);
        for k in 0..self.dim() {
            let ki = self.unflat(k);
            if ki.iter().any(|&i| i > keep) {
                continue;
            }
            let kn = out.flat(&ki).unwrap();
            for b in 0..self.dim() {
                let bi = self.unflat(b);
                if bi.iter().any(|&i| i > keep) {
                    continue;
                }
                let bn = out.flat(&bi).unwrap();
                out.coeffs[kn * dim + bn] = self.coeffs[k * self.dim() + b];
            }
        }
        out.hermitian = self.hermitian;
        out
    }

    /// Transpose on the second mode: `ρΓ[s,t;n,m] = ρ[s,m;n,t]`.
    pub fn partial_transpose(&self) -> Result<Self> {
        self.require_modes(2)?;
        let side = self.side();
        let mut out = vec![ZERO; self.coeffs.len()];
        for s in 0..side {
            for t in 0..side {
                for n in 0..side {
                    for m in 0..side {
                        out[((s * side + t) * side + n) * side + m] =
                            self.coeffs[((s * side + m) * side + n) * side + t];
                    }
                }
            }
        }
        // The partial transpose of a Hermitian operator is Hermitian.
        Ok(Self::from_raw(2, self.cutoff, out, self.hermitian))
    }

    /// Reduced operator of a two-mode operator on mode `keep` (0 or 1).
    pub fn partial_trace(&self, keep: usize) -> Result<Self> {
        self.require_modes(2)?;
        if keep > 1 {
            return Err(Error::InvalidMode { mode: keep, modes: 2 });
        }
        self.trace_out(1 - keep)
    }

    /// Trace out one mode of a multi-mode operator.
    pub fn trace_out(&self, mode: usize) -> Result<Self> {
        if mode >= self.modes {
            return Err(Error::InvalidMode {
                mode,
                modes: self.modes,
            });
        }
        if self.modes == 1 {
            return Err(Error::ModeCount { expected: 2, actual: 1 });
        }
        let side = self.side();
        let inner = side.pow((self.modes - 1 - mode) as u32);
        let outer = side.pow(mode as u32);
        let mut out = Self::zeros(self.modes - 1, self.cutoff)?;
        let rdim = out.dim();
        let dim = self.dim();
        // flat = (o * side + x) * inner + i
        for ko in 0..outer {
            for ki in 0..inner {
                let kr = ko * inner + ki;
                for bo in 0..outer {
                    for bi in 0..inner {
                        let br = bo * inner + bi;
                        let mut acc = ZERO;
                        for x in 0..side {
                            let k = (ko * side + x) * inner + ki;
                            let b = (bo * side + x) * inner + bi;
                            acc += self.coeffs[k * dim + b];
                        }
                        out.coeffs[kr * rdim + br] = acc;
                    }
                }
            }
        }
        out.hermitian = self.hermitian;
        Ok(out)
    }

    /// Spectral decomposition of a Hermitian operator.
    pub fn eig_hermitian(&self) -> Result<SpectralDecomposition> {
        self.require_hermitian()?;
        let n = self.dim();
        let (eig, scale) = self.scaled_eigen()?;
        let eig = nalgebra::linalg::SymmetricEigen {
            eigenvalues: eig.eigenvalues * scale,
            eigenvectors: eig.eigenvectors,
        };
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = DMatrix::from_fn(n, order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        })
    }

    // The solver can return NaN on very sparse input. It runs on the
    // operator rescaled to unit max-norm and, if that fails, again with a
    // unit shift, which is subtracted afterwards.
    fn scaled_eigen(&self) -> Result<(nalgebra::linalg::SymmetricEigen<Complex64, nalgebra::Dyn>, f64)> {
        let scale = self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let m = self.matrix() / Complex64::new(scale, 0.0);
        let finite = |e: &nalgebra::linalg::SymmetricEigen<Complex64, nalgebra::Dyn>| {
            e.eigenvalues.iter().all(|l| l.is_finite())
        };
        if let Some(eig) = m.clone().try_symmetric_eigen(1e-15, 10_000).filter(finite) {
            return Ok((eig, scale));
        }
        let n = m.nrows();
        let shifted = m + DMatrix::<Complex64>::identity(n, n);
        let mut eig = shifted
            .try_symmetric_eigen(1e-15, 10_000)
            .filter(finite)
            .ok_or(Error::Spectral)?;
        eig.eigenvalues.add_scalar_mut(-1.0);
        Ok((eig, scale))
    }

    /// Eigenvalues only, descending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.require_hermitian()?;
        let (eig, scale) = self.scaled_eigen()?;
        let mut ev: Vec<f64> = eig.eigenvalues.iter().map(|l| l * scale).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        Ok(ev)
    }

    /// Sum of absolute eigenvalues of a Hermitian operator.
    pub fn trace_norm(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().map(|l| l.abs()).sum())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.last().copied().unwrap_or(0.0))
    }

    /// `tr[ρ²]` for a Hermitian operator.
    pub fn purity(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }
}
