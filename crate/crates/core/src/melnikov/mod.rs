//! Breakdown of resonant vortex tubes: the tilted shear datum built from a
//! height profile, its first-order vorticity tendency, the Melnikov function
//! of a resonant torus, and fixed points of the perturbed return map.

mod breakdown;
mod fields;
mod function;
mod profile;

pub use breakdown::{
    breakdown_diagnostic, exactness_and_twist_audit, probe_time, probe_vorticity, rotation_numbers, torus_fluxes,
    vorticity_audit, window_heights, AuditReport, BreakdownOptions, BreakdownReport, BreakdownStatus, FixedPoint,
    FixedPointKind, ReturnMap, FLUX_TOL,
};
pub use fields::{
    build_omega0, build_u0, curl_form_defect, early_vorticity, omega0_at, phi_source, shear_deviation, shear_field,
    solve_phi, vorticity_bracket, Bracket, AUDIT_TOL, SOURCE_MEAN_TOL, TRUNCATION_TOL,
};
pub use function::{
    closed_form, find_zeros, leading_order, peak_slope, MelnikovProblem, MelnikovProfile, MelnikovValue, MelnikovZero,
    ZeroSet, DEGENERACY, MAX_REFINEMENTS, MIN_SAMPLES_PER_P, MODE_CUTOFF, NODE_DENSITY, QUADRATURE_TOL, ZERO_TOL,
};
pub use profile::{ProfileH, ProfileMode, ResonanceTarget, Shift};

use thiserror::Error;

use crate::spectral::SpectralError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MelnikovError {
    #[error("p = {p} and q = {q} must be positive and coprime")]
    NotCoprime { p: u32, q: u32 },
    #[error("p/q = {p}/{q} lies outside the window (cot 3π/8, 1)")]
    OutsideWindow { p: u32, q: u32 },
    #[error("parameter {name} = {value} is out of range")]
    BadParameter { name: &'static str, value: f64 },
    #[error("truncation to grid {grid} drops {error:e} of the field; use grid {suggested} or a narrower profile")]
    Truncation { error: f64, grid: usize, suggested: usize },
    #[error("potential source has mean {0:e}; the synthesis is inconsistent")]
    SourceMean(f64),
    #[error("curl of the velocity misses the vorticity by {0:e}")]
    CurlMismatch(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("quadrature refinement estimate {estimate:e} stays above tolerance")]
    Quadrature { estimate: f64 },
    #[error("profile has {found} samples, zero search needs {needed}")]
    TooFewSamples { found: usize, needed: usize },
    #[error("profile vanishes identically; no isolated zeros")]
    NoIsolatedZeros,
    #[error("vorticity is not transverse to the section near x1 = {x1}")]
    NonTransverse { x1: f64 },
    #[error("flux {flux:e} through a coordinate torus; the field is not exact")]
    Exactness { flux: f64 },
}
