use super::constants::ScenarioConstants;
use super::ScenarioError;
use crate::beltrami::{eigen_residual, reynolds_beltrami, shear_beltrami_axis};
use crate::spectral::{FourierField, Grid};

type Field = FourierField<f64>;

/// Largest relative eigen-residual accepted for a slot field.
pub const EIGEN_TOL: f64 = 1e-10;

/// Shear axis of the default field in slot `k`: even slots share the axis of
/// `B_{N₀}`, odd slots are rotated onto the first coordinate axis.
pub fn slot_axis(k: usize) -> usize {
    if k % 2 == 0 {
        2
    } else {
        0
    }
}

/// Unit-norm shear fields `W₀ … W_n` of frequencies `N₀ … N_n` with the axes
/// of [`slot_axis`].
pub fn default_fields(constants: &ScenarioConstants, grid: Grid) -> Result<Vec<Field>, ScenarioError> {
    (0..=constants.n())
        .map(|k| {
            let nk = desk_frequency(constants, k, grid)?;
            Ok(shear_beltrami_axis(nk, slot_axis(k), grid)?)
        })
        .collect()
}

fn desk_frequency(constants: &ScenarioConstants, k: usize, grid: Grid) -> Result<u32, ScenarioError> {
    let nk = constants.frequency(k).ok_or(ScenarioError::NotDeskScale { slot: k })?;
    if nk as i64 > grid.band() {
        return Err(ScenarioError::FrequencyOutOfBand { slot: k, frequency: nk, band: grid.band() });
    }
    Ok(nk as u32)
}

fn check_slots(constants: &ScenarioConstants, fields: &[Field]) -> Result<(), ScenarioError> {
    let n = constants.n();
    if fields.len() != n + 1 {
        return Err(ScenarioError::Count { what: "fields", expected: n + 1, found: fields.len() });
    }
    let grid = fields[0].grid();
    for (k, w) in fields.iter().enumerate() {
        if w.grid() != grid {
            return Err(ScenarioError::GridMismatch { slot: k });
        }
        let nk = desk_frequency(constants, k, grid)?;
        let res = eigen_residual(w, nk);
        if !(res <= EIGEN_TOL) {
            return Err(ScenarioError::NotBeltrami { slot: k, frequency: nk as u64, residual: res });
        }
    }
    Ok(())
}

/// Assembled initial velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialDatum {
    pub field: Field,
    /// Factor applied to reach the prescribed L² norm (1 for the Reynolds datum).
    pub q: f64,
    /// `|q − 1| / δ₁`, the constant in `|q − 1| ≤ C δ₁` (0 when `δ₁ = 0`).
    pub q_constant: f64,
}

/// `q(M W₀ + Σ δ_j W_j)` with `q = M / ‖M W₀ + Σ δ_j W_j‖_{L²}`.
pub fn build_initial_datum(constants: &ScenarioConstants, fields: &[Field]) -> Result<InitialDatum, ScenarioError> {
    check_slots(constants, fields)?;
    let mut u = fields[0].scaled(constants.amplitude());
    add_perturbation(constants, fields, &mut u);
    let q = constants.amplitude() / u.l2_norm();
    u.scale_in_place(q);
    u.refresh_flags();
    Ok(InitialDatum { field: u, q, q_constant: q_constant(constants, q) })
}

/// `ν M N₀ B̃_{N₀} + Σ δ_j W_j`; `fields[0]` is replaced by the three-shear
/// family of frequency `N₀`, and no L² rescaling is applied.
pub fn build_reynolds_datum(constants: &ScenarioConstants, fields: &[Field]) -> Result<InitialDatum, ScenarioError> {
    check_slots(constants, fields)?;
    let grid = fields[0].grid();
    let n0 = desk_frequency(constants, 0, grid)?;
    let base: Field = reynolds_beltrami(n0, grid)?;
    let mut u = base.scaled(constants.nu() * constants.amplitude() * n0 as f64);
    add_perturbation(constants, fields, &mut u);
    u.refresh_flags();
    Ok(InitialDatum { field: u, q: 1.0, q_constant: 0.0 })
}

fn add_perturbation(constants: &ScenarioConstants, fields: &[Field], u: &mut Field) {
    for (j, w) in fields.iter().enumerate().skip(1) {
        u.axpy(constants.delta(j), w);
    }
}

fn q_constant(constants: &ScenarioConstants, q: f64) -> f64 {
    let d1 = constants.delta(1);
    if d1 > 0.0 {
        (q - 1.0).abs() / d1
    } else {
        0.0
    }
}

/// `‖(u·∇)u‖_{L²} / (ν ‖Δu‖_{L²})`. The product is formed on a grid fine
/// enough that dealiasing removes nothing.
pub fn reynolds_number(u: &Field, nu: f64) -> Result<f64, ScenarioError> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(ScenarioError::BadParameter { name: "nu", value: nu });
    }
    let kmax = u.active_modes(0.0).iter().flat_map(|(k, _)| k.iter().map(|c| c.abs())).max().unwrap_or(0);
    let mut n = u.grid().n();
    while 3 * 2 * kmax >= n as i64 {
        n *= 2;
    }
    let fine = u.resample(Grid::new(n)?);
    let lap = fine.laplacian().l2_norm();
    if lap == 0.0 {
        return Err(ScenarioError::BadParameter { name: "|Δu|", value: 0.0 });
    }
    Ok(fine.advect_dealiased(&fine).l2_norm() / (nu * lap))
}
