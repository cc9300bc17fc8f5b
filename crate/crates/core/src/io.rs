//! Text serialization of Fock operators and covariance matrices.
//!
//! State files are JSON documents
//!
//! ```json
//! {"modes": 2, "cutoff": 1, "coeffs": [[0.5, 0.0], [0.0, 0.0], ...]}
//! ```
//!
//! with `coeffs` the row-major `(ket, bra)` array as `[re, im]` pairs. Floats
//! are written in shortest round-trip form and parsed exactly, so a
//! save/load cycle reproduces every bit.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fock::FockOperator;
use crate::gaussian::CovMat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub modes: usize,
    pub cutoff: usize,
    pub coeffs: Vec<[f64; 2]>,
}

impl From<&FockOperator> for StateFile {
    fn from(op: &FockOperator) -> Self {
        Self {
            modes: op.modes(),
            cutoff: op.cutoff(),
            coeffs: op.coeffs().iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl TryFrom<StateFile> for FockOperator {
    type Error = crate::Error;

    fn try_from(f: StateFile) -> Result<Self> {
        let coeffs = f.coeffs.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        FockOperator::from_coeffs(f.modes, f.cutoff, coeffs)
    }
}

pub fn state_to_string(op: &FockOperator) -> Result<String> {
    Ok(serde_json::to_string(&StateFile::from(op))?)
}

pub fn state_from_str(s: &str) -> Result<FockOperator> {
    let f: StateFile = serde_json::from_str(s)?;
    f.try_into()
}

pub fn save_state(op: &FockOperator, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, state_to_string(op)?)?;
    Ok(())
}

pub fn load_state(path: impl AsRef<Path>) -> Result<FockOperator> {
    state_from_str(&std::fs::read_to_string(path)?)
}

/// Covariance matrix as `{"dim": 4, "data": [...row-major...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovMatFile {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl From<&CovMat> for CovMatFile {
    fn from(g: &CovMat) -> Self {
        Self {
            dim: g.dim(),
            data: g.row_major(),
        }
    }
}

impl TryFrom<CovMatFile> for CovMat {
    type Error = crate::Error;

    fn try_from(f: CovMatFile) -> Result<Self> {
        CovMat::from_row_major(f.dim, &f.data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn state_roundtrip_is_bit_exact(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 32)) {
            let coeffs: Vec<Complex64> = vals.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
            let op = FockOperator::from_coeffs(2, 1, coeffs).unwrap();
            let back = state_from_str(&state_to_string(&op).unwrap()).unwrap();
            prop_assert_eq!(back.coeffs(), op.coeffs());
        }
    }

    #[test]
    fn file_roundtrip() {
        let dir = std::env::temp_dir().join(format!("gaussify-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.json");
        let op = FockOperator::projector(2, 2, &[1, 0]).unwrap().scaled(1.0 / 3.0);
        save_state(&op, &path).unwrap();
        let back = load_state(&path).unwrap();
        assert_eq!(back, op);
        assert!(back.is_marked_hermitian());
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn covmat_roundtrip() {
        let g = crate::gaussian::tmss_cov(0.3).unwrap();
        let f = CovMatFile::from(&g);
        let text = serde_json::to_string(&f).unwrap();
        let back: CovMat = serde_json::from_str::<CovMatFile>(&text).unwrap().try_into().unwrap();
        assert_eq!(back, g);
    }
}
