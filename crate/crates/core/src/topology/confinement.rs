use std::f64::consts::PI;

use rayon::prelude::*;

use super::eval::{vorticity_evaluator, VectorField};
use super::ode::{integrate, Flow, OdeOptions};
use super::TopologyError;
use crate::beltrami::shear_amplitude;
use crate::scalar::Real;
use crate::spectral::FourierField;
use crate::stability::log_log_slope;

const TAU: f64 = 2.0 * PI;

/// Aperture of the seed bands.
pub const SEED_APERTURE: f64 = 0.1;
/// Aperture the lines must stay inside.
pub const HOLD_APERTURE: f64 = 0.2;

/// Quarter-turn band of `R/2πNZ` centred at `(j−1)π/2 + 2πn`, widened by
/// `delta` on each side; `j ∈ 1..=4`, `n ∈ 0..N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfinementBand {
    pub j: usize,
    pub n: usize,
    pub delta: f64,
    pub frequency: u32,
}

impl ConfinementBand {
    pub fn centre(&self) -> f64 {
        (self.j as f64 - 1.0) * PI / 2.0 + TAU * self.n as f64
    }

    pub fn half_width(&self) -> f64 {
        PI / 4.0 + self.delta
    }

    /// Membership of `z` in the open band, modulo `2πN`.
    pub fn contains(&self, z: f64) -> bool {
        let period = TAU * self.frequency as f64;
        let mut d = (z - self.centre()).rem_euclid(period);
        if d > period / 2.0 {
            d -= period;
        }
        d.abs() < self.half_width()
    }

    /// Axis whose coordinate advances monotonically on lines of the shear
    /// inside this band.
    pub fn monotone_axis(&self) -> usize {
        if self.j % 2 == 0 {
            0
        } else {
            1
        }
    }
}

/// All bands of aperture `delta` containing `z`.
pub fn bands_containing(z: f64, frequency: u32, delta: f64) -> Vec<ConfinementBand> {
    let mut out = Vec::new();
    for n in 0..frequency as usize {
        for j in 1..=4 {
            let b = ConfinementBand { j, n, delta, frequency };
            if b.contains(z) {
                out.push(b);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfinementEntry {
    pub seed: [f64; 3],
    /// Seed bands of aperture 1/10 as `(j, n)`.
    pub bands: Vec<(usize, usize)>,
    /// `max_s N|x₃(s) − x₃⁰|`.
    pub max_excursion: f64,
    /// The line stayed inside the widened version of one seed band.
    pub confined: bool,
    pub truncated: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfinementReport {
    pub entries: Vec<ConfinementEntry>,
    pub max_excursion: f64,
    pub all_confined: bool,
}

impl ConfinementReport {
    /// Indices of seeds whose lines left their band.
    pub fn failures(&self) -> Vec<usize> {
        self.entries.iter().enumerate().filter(|(_, e)| !e.confined).map(|(i, _)| i).collect()
    }
}

/// Confinement of the vortex lines of `B′` near the shear of frequency `N`.
///
/// Lines are traced along `curl B′ / (N c)`, whose unperturbed speed is one,
/// so a horizon of `periods` corresponds to `2π · periods` in line time.
pub fn confinement_check<T: Real>(
    b_prime: &FourierField<T>,
    frequency: u32,
    seeds: &[[f64; 3]],
    periods: f64,
    tol: f64,
) -> Result<ConfinementReport, TopologyError> {
    let field = vorticity_evaluator(b_prime, 1.0 / (frequency as f64 * shear_amplitude()));
    confinement_check_field(&*field, frequency, seeds, periods, tol)
}

/// As [`confinement_check`] for a line field that is already normalized.
pub fn confinement_check_field(
    field: &dyn VectorField,
    frequency: u32,
    seeds: &[[f64; 3]],
    periods: f64,
    tol: f64,
) -> Result<ConfinementReport, TopologyError> {
    if frequency == 0 {
        return Err(TopologyError::ZeroFrequency);
    }
    if !(tol >= 1e-12) {
        return Err(TopologyError::BadTolerance(tol));
    }
    let nf = frequency as f64;
    let entries: Vec<ConfinementEntry> = seeds
        .par_iter()
        .map(|&seed| {
            let z0 = nf * seed[2];
            let seeds_bands = bands_containing(z0, frequency, SEED_APERTURE);
            let holds: Vec<ConfinementBand> =
                seeds_bands.iter().map(|b| ConfinementBand { delta: HOLD_APERTURE, ..*b }).collect();
            let mut inside = vec![true; holds.len()];
            let mut excursion = 0.0f64;
            let opts = OdeOptions { h_max: 1.0, ..OdeOptions::with_tol(tol) };
            let result = integrate(
                |_, x| field.eval(*x),
                0.0,
                seed,
                TAU * periods,
                &opts,
                |_, x, _| {
                    let z = nf * x[2];
                    excursion = excursion.max((z - z0).abs());
                    for (flag, b) in inside.iter_mut().zip(&holds) {
                        *flag = *flag && b.contains(z);
                    }
                    if inside.iter().any(|&f| f) {
                        Flow::Continue
                    } else {
                        Flow::Stop
                    }
                },
            );
            ConfinementEntry {
                seed,
                bands: seeds_bands.iter().map(|b| (b.j, b.n)).collect(),
                max_excursion: excursion,
                confined: inside.iter().any(|&f| f) && result.is_ok(),
                truncated: result.err().map(|e| e.to_string()),
            }
        })
        .collect();
    let max_excursion = entries.iter().map(|e| e.max_excursion).fold(0.0, f64::max);
    let all_confined = entries.iter().all(|e| e.confined);
    Ok(ConfinementReport { entries, max_excursion, all_confined })
}

/// Heights `x₃ ∈ [0, 2π)` where the shear of frequency `N` is resonant with
/// a wavevector: `k₁ sin(N x₃) + k₂ cos(N x₃) = 0`.
pub fn resonant_heights(wavevectors: &[[i64; 3]], frequency: u32) -> Vec<f64> {
    let nf = frequency as f64;
    let mut out: Vec<f64> = Vec::new();
    for k in wavevectors {
        if k[0] == 0 && k[1] == 0 {
            continue;
        }
        let base = (-(k[1] as f64)).atan2(k[0] as f64);
        for m in 0..(2 * frequency) as i64 {
            let x3 = ((base + PI * m as f64) / nf).rem_euclid(TAU);
            if !out.iter().any(|&h| (h - x3).abs() < 1e-12) {
                out.push(x3);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Log-log slope of the largest excursion against the perturbation size.
pub fn excursion_slope(amplitudes: &[f64], excursions: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = amplitudes.iter().copied().zip(excursions.iter().copied()).collect();
    log_log_slope(&pts)
}

/// Seeded divergence-free perturbation with wavevectors in `|k_i| ≤ kmax`,
/// scaled so that `‖curl P‖_{L∞} = N c` for the shear amplitude `c`.
pub fn seeded_perturbation(grid: crate::spectral::Grid, seed: u64, kmax: i64, frequency: u32) -> FourierField<f64> {
    use rand::{Rng, SeedableRng};
    use rustfft::num_complex::Complex;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for k1 in -kmax..=kmax {
        for k2 in -kmax..=kmax {
            for k3 in 0..=kmax {
                if k1 == 0 && k2 == 0 && k3 == 0 {
                    continue;
                }
                let a = [0; 3].map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                modes.push(([k1, k2, k3], a));
            }
        }
    }
    let p = FourierField::synthesize(grid, &modes, true).expect("modes fit the grid").leray_project();
    let peak = p.curl().max_speed(2);
    p.scaled(frequency as f64 * shear_amplitude() / peak)
}
