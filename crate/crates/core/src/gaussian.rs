//! Covariance matrices, the B-matrix limit prediction and Gaussian measures.
//!
//! Quadratures are ordered `(X₁, P₁, X₂, P₂)` and the symplectic form is
//! `Σ = ⊕ [[0, 1], [−1, 0]]`. A state's limit under iteration is fixed by
//! six low-order coefficients of `σ = ρ/ρ₀₀₀₀` after one step; they enter the
//! real symmetric matrix `B(ρ)`, and the limit covariance is
//! `γ = Σᵀ B⁻¹ Σ − 𝟙`.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::FockOperator;

/// Floor on `|ρ₀₀₀₀|` for the B-map.
pub const VACUUM_FLOOR: f64 = 1e-14;
/// Relative determinant below which `B` counts as singular.
pub const SINGULAR_B: f64 = 1e-12;
/// Tolerance on the quadratic relations of the pure-convergence test.
pub const TOL_COND: f64 = 1e-9;
/// Heisenberg check: `γ + iΣ ≥ −PHYSICAL_TOL`.
pub const PHYSICAL_TOL: f64 = 1e-10;

/// Real symmetric covariance matrix of one or two modes with optional first
/// moments.
#[derive(Clone, Debug, PartialEq)]
pub struct CovMat {
    matrix: DMatrix<f64>,
    mean: DVector<f64>,
}

impl CovMat {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        if !(dim == 2 || dim == 4) || matrix.ncols() != dim {
            return Err(Error::ShapeMismatch {
                left: format!("{}x{}", matrix.nrows(), matrix.ncols()),
                right: "2x2 or 4x4".into(),
            });
        }
        let residual = (&matrix - matrix.transpose()).abs().max();
        if !(residual <= 1e-12) {
            return Err(Error::NotSymmetric { residual });
        }
        Ok(Self {
            mean: DVector::zeros(dim),
            matrix,
        })
    }

    pub fn with_mean(mut self, mean: DVector<f64>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                left: format!("mean of length {}", mean.len()),
                right: format!("dim {}", self.dim()),
            });
        }
        self.mean = mean;
        Ok(self)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::CoeffLength {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn row_major(&self) -> Vec<f64> {
        self.matrix.transpose().iter().copied().collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// Conjugation `S γ Sᵀ`; first moments transform as `S d`.
    pub fn transformed(&self, s: &DMatrix<f64>) -> Result<Self> {
        let m = s * &self.matrix * s.transpose();
        let sym = (&m + m.transpose()) * 0.5;
        Self::new(sym)?.with_mean(s * &self.mean)
    }

    /// `(A, C, B)` blocks of a two-mode matrix `[[A, C], [Cᵀ, B]]`.
    pub fn blocks(&self) -> Result<(Matrix2<f64>, Matrix2<f64>, Matrix2<f64>)> {
        if self.dim() != 4 {
            return Err(Error::ShapeMismatch {
                left: format!("{}x{}", self.dim(), self.dim()),
                right: "4x4".into(),
            });
        }
        let g = &self.matrix;
        let block = |r: usize, c: usize| Matrix2::new(g[(r, c)], g[(r, c + 1)], g[(r + 1, c)], g[(r + 1, c + 1)]);
        Ok((block(0, 0), block(0, 2), block(2, 2)))
    }
}

/// Block-diagonal `Σ = ⊕ [[0, 1], [−1, 0]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SymplecticForm {
    pub dim: usize,
}

impl SymplecticForm {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.dim, self.dim);
        for k in (0..self.dim).step_by(2) {
            s[(k, k + 1)] = 1.0;
            s[(k + 1, k)] = -1.0;
        }
        s
    }

    /// Max-norm residual of `S Σ Sᵀ = Σ`.
    pub fn residual(&self, s: &DMatrix<f64>) -> f64 {
        let sig = self.matrix();
        (s * &sig * s.transpose() - sig).abs().max()
    }
}

/// The 4×4 covariance of a two-mode squeezed vacuum with squeezing `r`:
/// `ξ = cosh 2r` on the diagonal, `±ζ = ±sinh 2r` coupling `X₁X₂` and `P₁P₂`.
pub fn tmss_cov(r: f64) -> Result<CovMat> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::OutOfRange {
            name: "r",
            value: r,
            domain: "[0, ∞)",
        });
    }
    let (xi, zeta) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        xi,   0.0,   zeta, 0.0,
        0.0,  xi,    0.0,  -zeta,
        zeta, 0.0,   xi,   0.0,
        0.0,  -zeta, 0.0,  xi,
    ]);
    CovMat::new(m)
}

/// Truncated two-mode squeezed vacuum `(1−λ²)^{1/2} Σ λⁿ |n,n⟩`. Not
/// renormalized: the trace is `1 − λ^{2(N+1)}`.
pub fn tmss_fock(lambda: f64, cutoff: usize) -> Result<FockOperator> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::OutOfRange {
            name: "lambda",
            value: lambda,
            domain: "[0, 1)",
        });
    }
    let mut op = FockOperator::zeros(2, cutoff)?;
    let norm = 1.0 - lambda * lambda;
    for n in 0..=cutoff {
        for m in 0..=cutoff {
            let v = norm * lambda.powi((n + m) as i32);
            if v != 0.0 || (n == 0 && m == 0) {
                op.set_hermitian(&[n, n], &[m, m], Complex64::new(v, 0.0))?;
            }
        }
    }
    op.check_truncation();
    Ok(op)
}

/// Symmetric loss of amplitude transmittance `θ` on every mode:
/// `γ ↦ θ²γ + (1−θ²)𝟙`.
pub fn loss_channel_cov(gamma: &CovMat, theta: f64) -> Result<CovMat> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::OutOfRange {
            name: "theta",
            value: theta,
            domain: "[0, 1]",
        });
    }
    let t2 = theta * theta;
    let dim = gamma.dim();
    let m = gamma.matrix() * t2 + DMatrix::identity(dim, dim) * (1.0 - t2);
    CovMat::new(m)?.with_mean(gamma.mean() * theta)
}

/// Minimum eigenvalue of the Hermitian matrix `γ + iΣ`.
pub fn heisenberg_min_eig(gamma: &CovMat) -> f64 {
    let sig = SymplecticForm::new(gamma.dim()).matrix();
    let h = gamma.matrix().map(|x| Complex64::new(x, 0.0)) + sig.map(|x| Complex64::new(0.0, x));
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn is_physical(gamma: &CovMat) -> bool {
    heisenberg_min_eig(gamma) >= -PHYSICAL_TOL
}

fn require_physical(gamma: &CovMat) -> Result<()> {
    let min_eig = heisenberg_min_eig(gamma);
    if min_eig >= -PHYSICAL_TOL {
        Ok(())
    } else {
        Err(Error::Unphysical { min_eig })
    }
}

/// Symplectic eigenvalues, ascending, one per mode: the moduli of the
/// eigenvalues of `Σγ`, which come in pairs `±iν`.
///
/// For `γ > 0` they are read off the Hermitian matrix `γ^½ (iΣ) γ^½`, whose
/// spectrum is `±ν` and well conditioned even when the `ν` coincide.
/// Otherwise `ν²` is taken from `x² − Δx + det γ = 0`,
/// `Δ = det A + det B + 2 det C`. Neither route iterates without bound,
/// unlike a general non-symmetric eigen-solver on a defective `Σγ`.
pub fn symplectic_eigenvalues(gamma: &CovMat) -> Vec<f64> {
    let g = gamma.matrix();
    let n = g.nrows();
    if let Some(eig) = g.clone().try_symmetric_eigen(f64::EPSILON, 1000) {
        if eig.eigenvalues.iter().all(|&l| l > 0.0) {
            let root = &eig.eigenvectors
                * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
                * eig.eigenvectors.transpose();
            let root = root.map(|x| Complex64::new(x, 0.0));
            let isig = SymplecticForm::new(n).matrix().map(|x| Complex64::new(0.0, x));
            let k = &root * isig * &root;
            let k = (&k + k.adjoint()) * Complex64::new(0.5, 0.0);
            if let Some(e) = k.try_symmetric_eigen(f64::EPSILON, 1000) {
                let mut moduli: Vec<f64> = e.eigenvalues.iter().map(|l| l.abs()).collect();
                moduli.sort_by(f64::total_cmp);
                return moduli.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect();
            }
        }
    }
    symplectic_eigenvalues_invariants(gamma)
}

fn symplectic_eigenvalues_invariants(gamma: &CovMat) -> Vec<f64> {
    let det = gamma.matrix().determinant();
    if gamma.dim() == 2 {
        return vec![det.abs().sqrt()];
    }
    let (a, c, b) = gamma.blocks().expect("covariance matrices are 2x2 or 4x4");
    let delta = a.determinant() + b.determinant() + 2.0 * c.determinant();
    let disc = delta * delta - 4.0 * det;
    if disc < 0.0 {
        // Complex-conjugate roots of modulus √det.
        let nu = det.abs().sqrt().sqrt();
        return vec![nu, nu];
    }
    // Larger root directly, the smaller from the product of roots.
    let big = (0.5 * (delta.abs() + disc.sqrt())).copysign(delta);
    let small = if big != 0.0 { det / big } else { 0.0 };
    let mut nus = vec![big.abs().sqrt(), small.abs().sqrt()];
    nus.sort_by(f64::total_cmp);
    nus
}

/// `Λ γ Λ` with `Λ = diag(1, 1, 1, −1)`: the partial transpose on the level
/// of covariance matrices.
pub fn partial_transpose_cov(gamma: &CovMat) -> Result<CovMat> {
    if gamma.dim() != 4 {
        return Err(Error::ModeCount {
            expected: 2,
            actual: gamma.dim() / 2,
        });
    }
    let lam = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0, -1.0]));
    CovMat::new(&lam * gamma.matrix() * &lam)
}

/// Logarithmic negativity in bits, `Σ_{ν̃<1} −log₂ ν̃`.
pub fn gaussian_log_negativity(gamma: &CovMat) -> Result<f64> {
    require_physical(gamma)?;
    let nus = symplectic_eigenvalues(&partial_transpose_cov(gamma)?);
    Ok(nus
        .iter()
        .filter(|&&v| v < 1.0)
        .map(|v| -v.log2())
        .sum::<f64>()
        .max(0.0))
}

fn entropy_term(nu: f64) -> f64 {
    let x = ((nu - 1.0) / 2.0).max(0.0);
    if x <= 0.0 {
        return 0.0;
    }
    (x + 1.0) * (x + 1.0).log2() - x * x.log2()
}

/// Von Neumann entropy in bits from the symplectic spectrum.
pub fn gaussian_entropy(gamma: &CovMat) -> Result<f64> {
    require_physical(gamma)?;
    Ok(symplectic_eigenvalues(gamma).into_iter().map(entropy_term).sum())
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `E_S = max{−½ ln λ_min(γ), 0}` in nats, normalized so that a two-mode
/// squeezed vacuum of squeezing `r` gives `r`.
pub fn squeezing_es(gamma: &CovMat) -> f64 {
    (-0.5 * min_eigenvalue(gamma.matrix()).ln()).max(0.0)
}

/// The stated decibel relation `2 E_S / ln 10`, taken literally.
pub fn es_db(es: f64) -> f64 {
    2.0 * es / std::f64::consts::LN_10
}

/// Local symplectic `S_A ⊕ S_B` bringing a two-mode covariance matrix to
/// standard form: `α𝟙` and `β𝟙` on the diagonal blocks and a diagonal
/// off-block.
pub fn standard_form_transform(gamma: &CovMat) -> Result<DMatrix<f64>> {
    let (a, c, b) = gamma.blocks()?;
    let sa = williamson_2x2(&a)?;
    let sb = williamson_2x2(&b)?;
    let c1 = sa * c * sb.transpose();
    let svd = c1.svd(true, true);
    let (u, vt) = (svd.u.ok_or(Error::Spectral)?, svd.v_t.ok_or(Error::Spectral)?);
    // Only rotations are symplectic; fold a reflection into the second axis.
    let fix = |m: Matrix2<f64>| {
        if m.determinant() < 0.0 {
            Matrix2::new(m[(0, 0)], -m[(0, 1)], m[(1, 0)], -m[(1, 1)])
        } else {
            m
        }
    };
    let ra = fix(u).transpose();
    let rb = fix(vt.transpose()).transpose();
    let (la, lb) = (ra * sa, rb * sb);
    let mut s = DMatrix::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            s[(i, j)] = la[(i, j)];
            s[(i + 2, j + 2)] = lb[(i, j)];
        }
    }
    Ok(s)
}

/// `S = √α · M^{−1/2}` with `α = √det M`, so `S M Sᵀ = α𝟙` and `det S = 1`.
fn williamson_2x2(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let eig = m.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Unphysical {
            min_eig: eig.eigenvalues.min(),
        });
    }
    let alpha = (eig.eigenvalues[0] * eig.eigenvalues[1]).sqrt();
    let q = eig.eigenvectors;
    let inv_sqrt = Matrix2::new(
        1.0 / eig.eigenvalues[0].sqrt(),
        0.0,
        0.0,
        1.0 / eig.eigenvalues[1].sqrt(),
    );
    Ok(q * inv_sqrt * q.transpose() * alpha.sqrt())
}

/// Two-mode squeezing `E_TS`: `E_S` of the standard form, in the same
/// normalization as [`squeezing_es`].
pub fn squeezing_ets(gamma: &CovMat) -> Result<f64> {
    let s = standard_form_transform(gamma)?;
    Ok(squeezing_es(&gamma.transformed(&s)?))
}

/// The six coefficients of `σ = ρ/ρ₀₀₀₀` that fix the Gaussian limit.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Seeds {
    pub s1010: Complex64,
    pub s0101: Complex64,
    pub s1001: Complex64,
    pub s2000: Complex64,
    pub s0200: Complex64,
    pub s1100: Complex64,
}

impl Seeds {
    pub fn of(rho: &FockOperator) -> Result<Self> {
        if rho.modes() != 2 {
            return Err(Error::ModeCount {
                expected: 2,
                actual: rho.modes(),
            });
        }
        let v = rho.get2(0, 0, 0, 0);
        if !(v.norm() > VACUUM_FLOOR) {
            return Err(Error::VanishingVacuum { value: v.norm() });
        }
        let s = |a, b, c, d| rho.get2(a, b, c, d) / v;
        Ok(Self {
            s1010: s(1, 0, 1, 0),
            s0101: s(0, 1, 0, 1),
            s1001: s(1, 0, 0, 1),
            s2000: s(2, 0, 0, 0),
            s0200: s(0, 2, 0, 0),
            s1100: s(1, 1, 0, 0),
        })
    }

    pub fn as_array(&self) -> [Complex64; 6] {
        [self.s1010, self.s0101, self.s1001, self.s2000, self.s0200, self.s1100]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Real symmetric 4×4 matrix of second-moment data.
#[derive(Clone, Debug, PartialEq)]
pub struct BMatrix(pub DMatrix<f64>);

impl BMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Build from the seeds. Real parts of the diagonal seeds are used.
    pub fn from_seeds(s: &Seeds) -> Self {
        let r2 = std::f64::consts::SQRT_2;
        let mut b = DMatrix::zeros(4, 4);
        b[(0, 0)] = 0.5 * (1.0 - s.s1010.re + r2 * s.s2000.re);
        b[(1, 1)] = 0.5 * (1.0 - s.s1010.re - r2 * s.s2000.re);
        b[(2, 2)] = 0.5 * (1.0 - s.s0101.re + r2 * s.s0200.re);
        b[(3, 3)] = 0.5 * (1.0 - s.s0101.re - r2 * s.s0200.re);
        b[(0, 1)] = s.s2000.im / r2;
        b[(2, 3)] = s.s0200.im / r2;
        b[(0, 2)] = 0.5 * (-s.s1001.re + s.s1100.re);
        b[(0, 3)] = 0.5 * (s.s1001.im + s.s1100.im);
        b[(1, 2)] = 0.5 * (-s.s1001.im + s.s1100.im);
        b[(1, 3)] = 0.5 * (-s.s1001.re - s.s1100.re);
        for i in 0..4 {
            for j in 0..i {
                b[(i, j)] = b[(j, i)];
            }
        }
        Self(b)
    }
}

pub fn b_matrix(rho: &FockOperator) -> Result<BMatrix> {
    Ok(BMatrix::from_seeds(&Seeds::of(rho)?))
}

/// Inverse of [`BMatrix::from_seeds`].
pub fn en_map(b: &BMatrix) -> Seeds {
    let b = &b.0;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = Complex64::new;
    Seeds {
        s1010: c(1.0 - b[(0, 0)] - b[(1, 1)], 0.0),
        s0101: c(1.0 - b[(2, 2)] - b[(3, 3)], 0.0),
        s1001: c(-b[(0, 2)] - b[(1, 3)], b[(0, 3)] - b[(1, 2)]),
        s2000: c(h * (b[(0, 0)] - b[(1, 1)]), h * 2.0 * b[(0, 1)]),
        s0200: c(h * (b[(2, 2)] - b[(3, 3)]), h * 2.0 * b[(2, 3)]),
        s1100: c(b[(0, 2)] - b[(1, 3)], b[(0, 3)] + b[(1, 2)]),
    }
}

/// Predicted Gaussian limit of the iteration.
#[derive(Clone, Debug)]
pub struct LimitPrediction {
    pub b: BMatrix,
    pub det: f64,
    /// 2-norm condition number of `B`.
    pub condition: f64,
    pub gamma: CovMat,
    pub symplectic_eigenvalues: Vec<f64>,
    /// `γ + iΣ ≥ 0`; false means there is no physical Gaussian limit.
    pub physical: bool,
}

/// Limit covariance `γ = Σᵀ B(ρ⁽¹⁾)⁻¹ Σ − 𝟙` from the once-iterated state.
pub fn predict_limit(rho1: &FockOperator) -> Result<LimitPrediction> {
    let b = b_matrix(rho1)?;
    let m = b.matrix();
    let det = m.determinant();
    let sv = m.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let scale = smax.max(f64::MIN_POSITIVE).powi(4);
    if !(det.abs() >= SINGULAR_B * scale) {
        return Err(Error::SingularB { det, condition });
    }
    let inv = m.clone().try_inverse().ok_or(Error::SingularB { det, condition })?;
    let sig = SymplecticForm::new(4).matrix();
    let g = sig.transpose() * inv * &sig - DMatrix::<f64>::identity(4, 4);
    let gamma = CovMat::new((&g + g.transpose()) * 0.5)?;
    let nus = symplectic_eigenvalues(&gamma);
    let physical = is_physical(&gamma);
    Ok(LimitPrediction {
        b,
        det,
        condition,
        gamma,
        symplectic_eigenvalues: nus,
        physical,
    })
}

/// Outcome of the test for convergence to a pure Gaussian state.
#[derive(Clone, Debug, PartialEq)]
pub struct PureConvergence {
    pub vacuum_positive: bool,
    /// Residuals of `σ₁₀₁₀ = |σ₁₀₀₀|²`, `σ₀₁₀₁ = |σ₀₁₀₀|²` and
    /// `σ₁₀₀₁ = σ₁₀₀₀ σ₀₁₀₀*`.
    pub residuals: [f64; 3],
    /// Spectral norm of the 2×2 matrix of once-iterated squeezing seeds.
    pub norm: f64,
    pub holds: bool,
}

/// Necessary and sufficient test for convergence to a pure Gaussian state,
/// evaluated on the input state.
///
/// After one step `σ′₁₀₁₀ = σ₁₀₁₀ − |σ₁₀₀₀|²`, `σ′₁₀₀₁ = σ₁₀₀₁ −
/// σ₁₀₀₀σ₀₁₀₀*` and the squeezing seeds become `√2σ′₂₀₀₀ = √2σ₂₀₀₀ − σ₁₀₀₀²`,
/// `√2σ′₀₂₀₀ = √2σ₀₂₀₀ − σ₀₁₀₀²`, `σ′₁₁₀₀ = σ₁₁₀₀ − σ₁₀₀₀σ₀₁₀₀`. The limit
/// is pure iff the first three vanish and
/// `‖[[√2σ′₂₀₀₀, σ′₁₁₀₀], [σ′₁₁₀₀, √2σ′₀₂₀₀]]‖∞ < 1`.
pub fn pure_convergence_check(rho: &FockOperator) -> Result<PureConvergence> {
    if rho.modes() != 2 {
        return Err(Error::ModeCount {
            expected: 2,
            actual: rho.modes(),
        });
    }
    let v = rho.get2(0, 0, 0, 0);
    if !(v.re > VACUUM_FLOOR) {
        return Ok(PureConvergence {
            vacuum_positive: false,
            residuals: [f64::NAN; 3],
            norm: f64::NAN,
            holds: false,
        });
    }
    let s = |a, b, c, d| rho.get2(a, b, c, d) / v;
    let (s10, s01) = (s(1, 0, 0, 0), s(0, 1, 0, 0));
    let residuals = [
        (s(1, 0, 1, 0) - s10.norm_sqr()).norm(),
        (s(0, 1, 0, 1) - s01.norm_sqr()).norm(),
        (s(1, 0, 0, 1) - s10 * s01.conj()).norm(),
    ];
    let r2 = std::f64::consts::SQRT_2;
    let m11 = s(2, 0, 0, 0) * r2 - s10 * s10;
    let m22 = s(0, 2, 0, 0) * r2 - s01 * s01;
    let m12 = s(1, 1, 0, 0) - s10 * s01;
    let norm = spectral_norm_2x2(m11, m12, m12, m22);
    let holds = residuals.iter().all(|&r| r <= TOL_COND) && norm < 1.0;
    Ok(PureConvergence {
        vacuum_positive: true,
        residuals,
        norm,
        holds,
    })
}

/// Largest singular value of a complex 2×2 matrix.
fn spectral_norm_2x2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> f64 {
    let fro = a.norm_sqr() + b.norm_sqr() + c.norm_sqr() + d.norm_sqr();
    let det = (a * d - b * c).norm();
    let disc = (fro * fro - 4.0 * det * det).max(0.0).sqrt();
    ((fro + disc) / 2.0).sqrt()
}

fn lowered(idx: &[usize], mode: usize) -> Option<(Vec<usize>, f64)> {
    if idx[mode] == 0 {
        return None;
    }
    let mut out = idx.to_vec();
    out[mode] -= 1;
    Some((out, (idx[mode] as f64).sqrt()))
}

fn raised(idx: &[usize], mode: usize, cutoff: usize) -> Option<(Vec<usize>, f64)> {
    if idx[mode] == cutoff {
        return None;
    }
    let mut out = idx.to_vec();
    out[mode] += 1;
    let amp = (out[mode] as f64).sqrt();
    Some((out, amp))
}

/// `tr[ρ O]` for a normal-ordered product `O = Π a_j† · Π a_k` given as
/// `(creations, annihilations)` mode lists.
fn normal_moment(rho: &FockOperator, creations: &[usize], annihilations: &[usize]) -> Complex64 {
    let dim = rho.dim();
    let cutoff = rho.cutoff();
    let mut acc = Complex64::new(0.0, 0.0);
    'basis: for b in 0..dim {
        let mut idx = rho.unflat(b);
        let mut amp = 1.0;
        for &m in annihilations.iter().rev() {
            match lowered(&idx, m) {
                Some((i, a)) => {
                    idx = i;
                    amp *= a;
                }
                None => continue 'basis,
            }
        }
        for &m in creations.iter().rev() {
            match raised(&idx, m, cutoff) {
                Some((i, a)) => {
                    idx = i;
                    amp *= a;
                }
                None => continue 'basis,
            }
        }
        // O|b⟩ = amp |idx⟩, so ⟨b|ρO|b⟩ = amp ρ[b, idx].
        let k = rho.flat(&idx).expect("index within cutoff");
        acc += rho.coeffs()[b * dim + k] * amp;
    }
    acc
}

/// Covariance matrix and first moments of a one- or two-mode Fock state,
/// from normal-ordered moments and the canonical commutator (so the
/// truncation never distorts `[a, a†] = 1`).
pub fn covariance_from_fock(rho: &FockOperator) -> Result<CovMat> {
    let n = rho.modes();
    if n > 2 {
        return Err(Error::UnsupportedModes(n));
    }
    rho.require_hermitian()?;
    let tr = rho.trace().re;
    if !(tr > 0.0) {
        return Err(Error::ZeroTrace { trace: tr });
    }
    let mean_a: Vec<Complex64> = (0..n).map(|j| normal_moment(rho, &[], &[j]) / tr).collect();
    // ⟨a_j† a_k⟩ and ⟨a_j a_k⟩
    let mut ada = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    let mut aa = ada.clone();
    for j in 0..n {
        for k in 0..n {
            ada[j][k] = normal_moment(rho, &[j], &[k]) / tr;
            aa[j][k] = normal_moment(rho, &[], &[j, k]) / tr;
        }
    }
    // Ladder vector L = (a_1..a_n, a_1†..a_n†); ⟨L_μ L_ν⟩ from normal order.
    let ln = 2 * n;
    let mut second = vec![vec![Complex64::new(0.0, 0.0); ln]; ln];
    for mu in 0..ln {
        for nu in 0..ln {
            let (j, k) = (mu % n, nu % n);
            second[mu][nu] = match (mu < n, nu < n) {
                (true, true) => aa[j][k],
                (false, false) => aa[k][j].conj(),
                (false, true) => ada[j][k],
                (true, false) => ada[k][j] + if j == k { 1.0 } else { 0.0 },
            };
        }
    }
    let mean_l: Vec<Complex64> = (0..ln)
        .map(|mu| if mu < n { mean_a[mu] } else { mean_a[mu - n].conj() })
        .collect();
    // R = T L with X_j = (a_j + a_j†)/√2, P_j = (a_j − a_j†)/(i√2).
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut t = vec![vec![Complex64::new(0.0, 0.0); ln]; ln];
    for j in 0..n {
        t[2 * j][j] = Complex64::new(h, 0.0);
        t[2 * j][j + n] = Complex64::new(h, 0.0);
        t[2 * j + 1][j] = Complex64::new(0.0, -h);
        t[2 * j + 1][j + n] = Complex64::new(0.0, h);
    }
    let mut g = DMatrix::zeros(ln, ln);
    let mut d = DVector::zeros(ln);
    for r in 0..ln {
        d[r] = (0..ln).map(|mu| t[r][mu] * mean_l[mu]).sum::<Complex64>().re;
        for c in 0..ln {
            let mut acc = Complex64::new(0.0, 0.0);
            for mu in 0..ln {
                for nu in 0..ln {
                    acc += t[r][mu] * t[c][nu] * (second[mu][nu] - mean_l[mu] * mean_l[nu]);
                }
            }
            g[(r, c)] = 2.0 * acc.re;
        }
    }
    let g = (&g + g.transpose()) * 0.5;
    CovMat::new(g)?.with_mean(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prep::{example_state, ExampleState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn tmss_cov_examples() {
        assert_eq!(tmss_cov(0.0).unwrap(), CovMat::identity(4).unwrap());
        let g = tmss_cov(0.5f64.atanh()).unwrap();
        assert!(close(g.get(0, 0), 5.0 / 3.0, 1e-14));
        assert!(close(g.get(0, 2), 4.0 / 3.0, 1e-14));
        assert!(close(g.get(1, 3), -4.0 / 3.0, 1e-14));
        for nu in symplectic_eigenvalues(&g) {
            assert!(close(nu, 1.0, 1e-10));
        }
        assert!(is_physical(&g));
        assert!(tmss_cov(-0.1).is_err());
    }

    #[test]
    fn symplectic_form_squares_to_minus_identity() {
        for dim in [2, 4] {
            let s = SymplecticForm::new(dim).matrix();
            assert_eq!(&s * &s, -DMatrix::<f64>::identity(dim, dim));
        }
    }

    #[test]
    fn thermal_state_spectrum() {
        let g = CovMat::new(DMatrix::identity(4, 4) * 3.0).unwrap();
        assert_eq!(symplectic_eigenvalues(&g).len(), 2);
        for nu in symplectic_eigenvalues(&g) {
            assert!(close(nu, 3.0, 1e-12));
        }
        // n̄ = 1 per mode: g(1) = 2 bits each.
        assert!(close(gaussian_entropy(&g).unwrap(), 4.0, 1e-12));
        assert_eq!(gaussian_log_negativity(&g).unwrap(), 0.0);
    }

    #[test]
    fn tmss_fock_examples() {
        assert_eq!(
            tmss_fock(0.0, 3).unwrap(),
            FockOperator::projector(2, 3, &[0, 0]).unwrap()
        );
        let rho = tmss_fock(0.5, 10).unwrap();
        let s = Seeds::of(&rho).unwrap();
        assert!(close(s.s1100.re, 0.5, 1e-15));
        for z in [s.s1010, s.s0101, s.s1001, s.s2000, s.s0200] {
            assert_eq!(z, Complex64::new(0.0, 0.0));
        }
        assert!(close(rho.trace().re, 1.0 - 0.5f64.powi(22), 1e-15));
        assert!(tmss_fock(1.0, 3).is_err());
    }

    #[test]
    fn loss_channel_cov_examples() {
        let g = tmss_cov(0.5f64.atanh()).unwrap();
        assert_eq!(loss_channel_cov(&g, 1.0).unwrap(), g);
        assert!(
            (loss_channel_cov(&g, 0.0).unwrap().matrix() - DMatrix::identity(4, 4))
                .abs()
                .max()
                < 1e-15
        );
        let out = loss_channel_cov(&g, 0.9).unwrap();
        let (xi, zeta) = (g.get(0, 0), g.get(0, 2));
        assert!(close(out.get(0, 0), 1.0 + 0.81 * (xi - 1.0), 1e-14));
        assert!(close(out.get(0, 2), 0.81 * zeta, 1e-14));
        assert!(close(out.get(1, 3), -0.81 * zeta, 1e-14));
        assert!(loss_channel_cov(&g, 1.5).is_err());
    }

    #[test]
    fn log_negativity_of_tmss() {
        assert_eq!(gaussian_log_negativity(&CovMat::identity(4).unwrap()).unwrap(), 0.0);
        let en = gaussian_log_negativity(&tmss_cov(0.5f64.atanh()).unwrap()).unwrap();
        assert!(close(en, 3f64.log2(), 1e-12));
        let mut last = -1.0;
        for i in 1..20 {
            let lam = i as f64 / 20.0;
            let en = gaussian_log_negativity(&tmss_cov(lam.atanh()).unwrap()).unwrap();
            assert!(close(en, ((1.0 + lam) / (1.0 - lam)).log2(), 1e-10));
            assert!(en > last);
            last = en;
        }
    }

    #[test]
    fn unphysical_matrices_are_rejected() {
        let g = CovMat::new(DMatrix::identity(4, 4) * 0.5).unwrap();
        assert!(!is_physical(&g));
        assert!(matches!(gaussian_log_negativity(&g), Err(Error::Unphysical { .. })));
        assert!(matches!(gaussian_entropy(&g), Err(Error::Unphysical { .. })));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(CovMat::new(asym), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn symplectic_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (g, _) = random_physical(&mut rng);
            let (x, y) = (symplectic_eigenvalues(&g), symplectic_eigenvalues_invariants(&g));
            for (a, b) in x.iter().zip(&y) {
                assert!(close(*a, *b, 1e-6 * a.max(1.0)), "{x:?} {y:?}");
            }
        }
        // Indefinite input goes through the invariants and still terminates.
        let bad = CovMat::new(DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -0.5, 1.0, 1.0]))).unwrap();
        let nus = symplectic_eigenvalues(&bad);
        assert!(close(nus[0], 0.5, 1e-15) && close(nus[1], 1.0, 1e-15));
    }

    #[test]
    fn entropy_of_pure_states_vanishes() {
        assert_eq!(gaussian_entropy(&CovMat::identity(4).unwrap()).unwrap(), 0.0);
        for r in [0.1, 0.7, 1.3] {
            assert!(gaussian_entropy(&tmss_cov(r).unwrap()).unwrap().abs() < 1e-7);
        }
    }

    #[test]
    fn squeezing_measures_on_tmss() {
        assert_eq!(squeezing_es(&CovMat::identity(4).unwrap()), 0.0);
        assert_eq!(squeezing_ets(&CovMat::identity(4).unwrap()).unwrap(), 0.0);
        for r in [0.2, 0.55, 1.1] {
            let g = tmss_cov(r).unwrap();
            assert!(close(squeezing_es(&g), r, 1e-12));
            assert!(close(squeezing_ets(&g).unwrap(), r, 1e-10));
        }
        assert!(close(es_db(1.0), 2.0 / 10f64.ln(), 1e-15));
    }

    /// Random physical two-mode covariance: thermal diagonal conjugated by a
    /// product of symplectic generators.
    fn random_physical(rng: &mut ChaCha8Rng) -> (CovMat, DMatrix<f64>) {
        let mut s = DMatrix::<f64>::identity(4, 4);
        for _ in 0..4 {
            let pick = rng.gen_range(0..4);
            let x: f64 = rng.gen_range(-0.8..0.8);
            let mut g = DMatrix::<f64>::identity(4, 4);
            match pick {
                0 => {
                    // single-mode squeezer on a random mode
                    let m = 2 * rng.gen_range(0..2);
                    g[(m, m)] = x.exp();
                    g[(m + 1, m + 1)] = (-x).exp();
                }
                1 => {
                    // phase rotation
                    let m = 2 * rng.gen_range(0..2);
                    let (c, s) = (x.cos(), x.sin());
                    g[(m, m)] = c;
                    g[(m, m + 1)] = s;
                    g[(m + 1, m)] = -s;
                    g[(m + 1, m + 1)] = c;
                }
                2 => {
                    // beam splitter
                    let (c, s) = (x.cos(), x.sin());
                    for k in 0..2 {
                        g[(k, k)] = c;
                        g[(k + 2, k + 2)] = c;
                        g[(k, k + 2)] = s;
                        g[(k + 2, k)] = -s;
                    }
                }
                _ => {
                    // two-mode squeezer
                    let (c, s) = (x.cosh(), x.sinh());
                    for k in 0..4 {
                        g[(k, k)] = c;
                    }
                    g[(0, 2)] = s;
                    g[(2, 0)] = s;
                    g[(1, 3)] = -s;
                    g[(3, 1)] = -s;
                }
            }
            s = g * s;
        }
        let n1 = rng.gen_range(1.0..2.0);
        let n2 = rng.gen_range(1.0..2.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![n1, n1, n2, n2]));
        let g = &s * d * s.transpose();
        (CovMat::new((&g + g.transpose()) * 0.5).unwrap(), s)
    }

    #[test]
    fn random_symplectics_and_standard_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let form = SymplecticForm::new(4);
        for _ in 0..50 {
            let (g, s) = random_physical(&mut rng);
            assert!(form.residual(&s) < 1e-12);
            assert!(is_physical(&g));
            let t = standard_form_transform(&g).unwrap();
            assert!(form.residual(&t) < 1e-12);
            let sf = g.transformed(&t).unwrap();
            let m = sf.matrix();
            assert!(m[(0, 3)].abs() < 1e-10 && m[(1, 2)].abs() < 1e-10, "{m}");
            assert!(m[(0, 1)].abs() < 1e-10 && m[(2, 3)].abs() < 1e-10);
            assert!((m[(0, 0)] - m[(1, 1)]).abs() < 1e-10 && m[(0, 0)] >= 1.0 - 1e-10);
            assert!((m[(2, 2)] - m[(3, 3)]).abs() < 1e-10 && m[(2, 2)] >= 1.0 - 1e-10);
            // local symplectics leave the symplectic spectrum alone
            let (a, b) = (symplectic_eigenvalues(&g), symplectic_eigenvalues(&sf));
            assert!(close(a[0], b[0], 1e-9) && close(a[1], b[1], 1e-9));
        }
    }

    #[test]
    fn loss_keeps_states_physical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (g, _) = random_physical(&mut rng);
            for i in 0..=10 {
                let out = loss_channel_cov(&g, i as f64 / 10.0).unwrap();
                assert!(heisenberg_min_eig(&out) >= -1e-10);
            }
        }
    }

    #[test]
    fn b_matrix_examples() {
        let vac = FockOperator::projector(2, 3, &[0, 0]).unwrap();
        let b = b_matrix(&vac).unwrap();
        assert_eq!(b.0, DMatrix::identity(4, 4) * 0.5);

        let b = b_matrix(&tmss_fock(0.3, 8).unwrap()).unwrap().0;
        for i in 0..4 {
            assert!(close(b[(i, i)], 0.5, 1e-15));
        }
        assert!(close(b[(0, 2)], 0.15, 1e-15));
        assert!(close(b[(1, 3)], -0.15, 1e-15));
        assert_eq!(b[(0, 1)], 0.0);
        assert_eq!(b[(0, 3)], 0.0);

        let zero = FockOperator::projector(2, 2, &[1, 1]).unwrap();
        assert!(matches!(b_matrix(&zero), Err(Error::VanishingVacuum { .. })));
    }

    #[test]
    fn en_map_examples() {
        assert_eq!(en_map(&BMatrix(DMatrix::identity(4, 4) * 0.5)), Seeds::default());
        let s = en_map(&b_matrix(&tmss_fock(0.3, 6).unwrap()).unwrap());
        assert!((s.s1100 - Complex64::new(0.3, 0.0)).norm() < 1e-15);
        assert!(s.s1010.norm() + s.s0101.norm() + s.s1001.norm() + s.s2000.norm() + s.s0200.norm() < 1e-15);
    }

    #[test]
    fn vacuum_limit_is_vacuum() {
        let vac = FockOperator::projector(2, 3, &[0, 0]).unwrap();
        let p = predict_limit(&vac).unwrap();
        assert!((p.gamma.matrix() - DMatrix::identity(4, 4)).abs().max() < 1e-14);
        assert!(p.physical);
    }

    /// `+𝟙` in place of `−𝟙` would send the vacuum to `3𝟙`.
    #[test]
    fn limit_relation_calibrates_on_tmss() {
        for lam in [0.2, 0.5, 0.8] {
            let p = predict_limit(&tmss_fock(lam, 6).unwrap()).unwrap();
            let expect = tmss_cov(f64::atanh(lam)).unwrap();
            assert!((p.gamma.matrix() - expect.matrix()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn singular_b_is_reported() {
        // σ₁₁₀₀ = 1 with σ₀₁₀₁ = 0 makes B singular.
        let rho = example_state(ExampleState::Example2(0.0), 2).unwrap();
        assert!(matches!(predict_limit(&rho), Err(Error::SingularB { .. })));
    }

    #[test]
    fn pure_convergence_examples() {
        let r = pure_convergence_check(&example_state(ExampleState::Example3(0.8), 2).unwrap()).unwrap();
        assert!(r.holds);
        assert!(close(r.norm, 0.4, 1e-15));

        let r = pure_convergence_check(&example_state(ExampleState::Example2(0.5), 2).unwrap()).unwrap();
        assert!(!r.holds);
        assert!(close(r.norm, 1.0, 1e-12));

        let r = pure_convergence_check(&FockOperator::projector(2, 2, &[0, 0]).unwrap()).unwrap();
        assert!(r.holds && r.norm == 0.0);

        let r = pure_convergence_check(&FockOperator::projector(2, 2, &[0, 1]).unwrap()).unwrap();
        assert!(!r.vacuum_positive && !r.holds);
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let z: Vec<Complex64> = (0..4)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let m = nalgebra::Matrix2::new(z[0], z[1], z[2], z[3]);
            let svd = m.singular_values().max();
            assert!(close(spectral_norm_2x2(z[0], z[1], z[2], z[3]), svd, 1e-12));
        }
    }

    #[test]
    fn covariance_of_vacuum_and_tmss() {
        let vac = FockOperator::projector(2, 2, &[0, 0]).unwrap();
        let g = covariance_from_fock(&vac).unwrap();
        assert!((g.matrix() - DMatrix::identity(4, 4)).abs().max() < 1e-15);

        let rho = tmss_fock(0.5, 24).unwrap();
        let g = covariance_from_fock(&rho).unwrap();
        let expect = tmss_cov(0.5f64.atanh()).unwrap();
        assert!((g.matrix() - expect.matrix()).abs().max() < 1e-9);

        let one = FockOperator::projector(1, 3, &[1]).unwrap();
        let g = covariance_from_fock(&one).unwrap();
        assert!((g.matrix() - DMatrix::identity(2, 2) * 3.0).abs().max() < 1e-15);
    }

    #[test]
    fn covariance_sees_first_moments() {
        // (|0⟩ + |1⟩)/√2: ⟨a⟩ = ½, so ⟨X⟩ = 1/√2 and ⟨P⟩ = 0.
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        let rho = FockOperator::from_pure(1, 2, &[h, h, z]).unwrap();
        let g = covariance_from_fock(&rho).unwrap();
        assert!(close(g.mean()[0], std::f64::consts::FRAC_1_SQRT_2, 1e-15));
        assert!(close(g.mean()[1], 0.0, 1e-15));
        // ⟨X²⟩ = 1, so 2(⟨X²⟩ − ⟨X⟩²) = 1
        assert!(close(g.get(0, 0), 1.0, 1e-14));
        // ⟨P²⟩ = 1
        assert!(close(g.get(1, 1), 2.0, 1e-14));
    }
}
