use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected a {expected}-mode operator, got {actual} modes")]
    ModeCount { expected: usize, actual: usize },

    #[error("unsupported mode count {0} (1 to 4 modes)")]
    UnsupportedModes(usize),

    #[error("mode {mode} out of range for a {modes}-mode operator")]
    InvalidMode { mode: usize, modes: usize },

    #[error("operator is not hermitian (max residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    #[error("parameter `{name}` = {value} outside {domain}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("coefficient array has length {actual}, expected {expected}")]
    CoeffLength { expected: usize, actual: usize },

    #[error("vacuum coefficient {value:.3e} vanishes; B matrix undefined")]
    VanishingVacuum { value: f64 },

    #[error("success probability {probability:.3e} at step {step} is below the floor {floor:.1e}")]
    VanishingProbability { step: usize, probability: f64, floor: f64 },

    #[error("B matrix is singular (det {det:.3e}, condition number {condition:.3e})")]
    SingularB { det: f64, condition: f64 },

    #[error("covariance matrix violates the uncertainty relation (min eig of γ+iΣ = {min_eig:.3e})")]
    Unphysical { min_eig: f64 },

    #[error("matrix is not symmetric (residual {residual:.3e})")]
    NotSymmetric { residual: f64 },

    #[error("negative eigenvalue {value:.3e} beyond tolerance")]
    NegativeEigenvalue { value: f64 },

    #[error("input trace {trace} differs from 1")]
    NotNormalized { trace: f64 },

    #[error("trace {trace:.3e} cannot be normalized")]
    ZeroTrace { trace: f64 },

    #[error("eigendecomposition did not converge")]
    Spectral,

    #[error("cutoff {cutoff} exceeds the limit {max} for {what}")]
    ResourceGuard {
        what: &'static str,
        cutoff: usize,
        max: usize,
    },

    #[error("beam splitter amplitudes are not unitary: |T|²+|R|² = {norm}")]
    NonUnitary { norm: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
