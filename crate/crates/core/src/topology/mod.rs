//! Vortex-line geometry: tracing on the universal cover, closure and winding
//! detection, Poincaré sections, and band confinement near shear flows.

mod confinement;
mod eval;
mod lines;
pub mod ode;
mod section;

pub use confinement::{
    bands_containing, confinement_check, confinement_check_field, excursion_slope, resonant_heights,
    seeded_perturbation, ConfinementBand, ConfinementEntry, ConfinementReport, HOLD_APERTURE, SEED_APERTURE,
};
pub use eval::{evaluator, vorticity_evaluator, GridField, SparseField, VectorField, SPARSE_LIMIT};
pub use lines::{
    classify_structures, lattice_seeds, trace_vortex_line, winding_classification, wrap_pi, Closure, StructureSummary,
    Verdict, VortexLine, WindingReport, CLOSURE_TOL, STAGNATION, UNDETERMINED_LIMIT, WINDING_GUARD,
};
pub use section::{poincare_section, Crossing, SectionPlane, SectionPoints, MERGE_TOL, TRANSVERSALITY};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("vorticity {magnitude:e} at seed {seed:?} is below the stagnation threshold")]
    StagnantSeed { seed: [f64; 3], magnitude: f64 },
    #[error("tracing tolerance must be at least 1e-12, got {0:e}")]
    BadTolerance(f64),
    #[error("section axis must be 0, 1 or 2, got {0}")]
    BadAxis(usize),
    #[error("frequency must be positive")]
    ZeroFrequency,
}
