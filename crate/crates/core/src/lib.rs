//! Iterative Gaussification of continuous-variable entanglement on truncated
//! two-mode Fock spaces.
//!
//! Two copies of a two-mode state are mixed on 50:50 beam splitters and the
//! pair is kept when detectors on two of the output modes see no photons.
//! Iterating this drives a large class of non-Gaussian inputs towards a
//! centred Gaussian state whose covariance matrix is predicted from six
//! low-order matrix elements after the first step.
//!
//! Modules:
//! - [`fock`]: dense truncated operators in the number basis, partial
//!   transpose/trace and Hermitian spectra.
//! - [`distill`]: the ideal and detector-inefficient iteration maps and the
//!   multi-step driver.
//! - [`gaussian`]: covariance-matrix algebra, the B-matrix limit predictor,
//!   the pure-convergence test and Gaussian measures.
//! - [`measures`]: Fock-level log-negativity, entropy, trace distance and
//!   single-mode Wigner functions.
//! - [`prep`]: beam splitters, detector conditioning, photon loss and the
//!   example/prepared state families.
//!
//! Phase-space conventions: `X = (a + a†)/√2`, `P = (a − a†)/(i√2)`, ordering
//! `(X₁, P₁, X₂, P₂)`, covariance `γ = 2 Re⟨ΔRΔRᵀ⟩` so the vacuum has `γ = 𝟙`.

pub mod distill;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod io;
pub mod measures;
pub mod prep;
mod util;

pub use error::{Error, Result};
pub use fock::{FockOperator, SpectralDecomposition, Tolerances};
pub use nalgebra;
pub use num_complex::Complex64;
