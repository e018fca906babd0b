//! Fourier representation of periodic fields on [0, 2π)³.
//!
//! Coefficients follow `u(x) = Σ û(k) e^{ik·x}`; only k₃ ≥ 0 is stored and
//! the k₃ < 0 half is the conjugate mirror. Wavenumbers with |k_i| = n/2
//! are held at zero, so the usable band is |k_i| ≤ n/2 − 1.

mod fft;
mod field;
mod grid;

pub use fft::Fft3;
pub(crate) use field::{czero, times_i};
pub use field::{sample_grid, torus_volume, FieldFlags, FourierField, ScalarField, SobolevReport, C};
pub use grid::Grid;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid size {0} must be a power of two and at least 8")]
    GridSize(usize),
    #[error("wavevector {k:?} lies outside the grid band")]
    OutOfBand { k: [i64; 3] },
    #[error("mode list is not conjugate-symmetric at {k:?}")]
    RealityViolation { k: [i64; 3] },
    #[error("heat time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("dissipation exponent must be positive, got {0}")]
    BadExponent(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("coefficient array has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("right-hand side has nonzero mean {0:e}")]
    NonzeroMean(f64),
}
