//! Spectral laboratory for Navier–Stokes flows on the periodic box seeded by
//! Beltrami fields: field synthesis, pseudo-spectral time stepping, stability
//! monitoring, vortex-line topology, Melnikov analysis of resonant tori, and
//! the high-precision constant cascade driving the reconnection scenario.

pub mod scalar;
pub mod spectral;

pub mod beltrami;
pub mod io;
pub mod melnikov;
pub mod scenario;
pub mod solver;
pub mod stability;
pub mod topology;

pub use scalar::Real;

/// Double-precision vector field.
pub type Field = spectral::FourierField<f64>;
/// Single-precision vector field.
pub type Field32 = spectral::FourierField<f32>;
/// Double-precision scalar field.
pub type Scalar = spectral::ScalarField<f64>;
