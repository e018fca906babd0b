//! The reconnection cascade: high-precision choice and verification of the
//! frequencies `N₀ ≫ N₁ ≫ …` and amplitudes `δ₁ ≫ δ₂ ≫ …`, the predicted
//! dominant term at each time `T_k`, assembly of the initial datum, and a
//! desk-scale DNS whose vortex lines are classified at every `T_k`.

mod constants;
mod datum;
mod precision;
mod run;
mod schedule;

pub use constants::{
    choose_constants, choose_constants_with, desk_constants, CascadeOptions, Check, Condition, ScenarioConstants,
    FORMAT,
};
pub use datum::{
    build_initial_datum, build_reynolds_datum, default_fields, reynolds_number, slot_axis, InitialDatum, EIGEN_TOL,
};
pub use precision::{log10_of_ln, to_f64, HighPrecision, DEFAULT_PRECISION, MIN_PRECISION};
pub use run::{plane_normal, run_scenario, DeskOptions, ScenarioMode, ScenarioReport, TimeReport};
pub use schedule::{dominance_schedule, heat_dominance, DominanceSchedule, HeatDominance, ScheduleRow};

use thiserror::Error;

use crate::beltrami::BeltramiError;
use crate::solver::SolverError;
use crate::spectral::SpectralError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("parameter {name} = {value} is out of range")]
    BadParameter { name: &'static str, value: f64 },
    #[error("at least one time T_k is required")]
    NoTimes,
    #[error("times must be positive, finite and strictly increasing")]
    TimesNotIncreasing,
    #[error("expected {expected} {what}, found {found}")]
    Count { what: &'static str, expected: usize, found: usize },
    #[error("condition {} at index {index} cannot be met (log10 slack {log10_slack})", condition.key())]
    Unattainable { condition: Condition, index: usize, log10_slack: f64 },
    #[error("{what} exceeds the representable range")]
    Unrepresentable { what: String },
    #[error("high-precision context: {0}")]
    Precision(String),
    #[error("slot {slot} is not at desk scale: its frequency does not fit an integer")]
    NotDeskScale { slot: usize },
    #[error("slot {slot} frequency {frequency} exceeds the grid band {band}")]
    FrequencyOutOfBand { slot: usize, frequency: u64, band: i64 },
    #[error("slot {slot} field lives on a different grid")]
    GridMismatch { slot: usize },
    #[error("slot {slot} field is not a curl eigenfield of frequency {frequency} (residual {residual:e})")]
    NotBeltrami { slot: usize, frequency: u64, residual: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Beltrami(#[from] BeltramiError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}
