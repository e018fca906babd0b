use std::f64::consts::PI;

use rayon::prelude::*;

use super::eval::VectorField;
use super::ode::{advance, integrate, Flow, OdeOptions};
use super::TopologyError;

const TAU: f64 = 2.0 * PI;

/// Normal components below this are tangential.
pub const TRANSVERSALITY: f64 = 1e-8;
/// Crossings closer than this are merged.
pub const MERGE_TOL: f64 = 1e-9;

/// The plane `x[axis] = value (mod 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionPlane {
    pub axis: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub seed_index: usize,
    pub tau: f64,
    /// Crossing point reduced to [0, 2π)³.
    pub point: [f64; 3],
    /// Sign of the normal component of the field.
    pub direction: i8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectionPoints {
    pub crossings: Vec<Crossing>,
    /// Tangential crossings that were not recorded.
    pub skipped: usize,
}

/// Records up to `crossings` transverse crossings per seed within `tau_max`.
pub fn poincare_section(
    field: &dyn VectorField,
    plane: SectionPlane,
    seeds: &[[f64; 3]],
    crossings: usize,
    tau_max: f64,
    tol: f64,
) -> Result<SectionPoints, TopologyError> {
    if plane.axis > 2 {
        return Err(TopologyError::BadAxis(plane.axis));
    }
    if !(tol >= 1e-12) {
        return Err(TopologyError::BadTolerance(tol));
    }
    let per_seed: Vec<(Vec<Crossing>, usize)> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| section_one(field, plane, i, seed, crossings, tau_max, tol))
        .collect();
    let mut all = Vec::new();
    let mut skipped = 0;
    for (c, s) in per_seed {
        all.extend(c);
        skipped += s;
    }
    let mut merged: Vec<Crossing> = Vec::with_capacity(all.len());
    for c in all {
        let dup = merged.iter().any(|m| {
            m.direction == c.direction
                && (0..3).all(|a| super::lines::wrap_pi(m.point[a] - c.point[a]).abs() <= MERGE_TOL)
        });
        if !dup {
            merged.push(c);
        }
    }
    Ok(SectionPoints { crossings: merged, skipped })
}

fn section_one(
    field: &dyn VectorField,
    plane: SectionPlane,
    seed_index: usize,
    seed: [f64; 3],
    wanted: usize,
    tau_max: f64,
    tol: f64,
) -> (Vec<Crossing>, usize) {
    let a = plane.axis;
    let level = |x: &[f64; 3]| ((x[a] - plane.value) / TAU).floor();
    let mut out = Vec::new();
    let mut skipped = 0;
    let w0 = field.eval(seed);
    if super::lines::wrap_pi(seed[a] - plane.value).abs() < 1e-12 && w0[a].abs() < TRANSVERSALITY {
        skipped += 1;
    }
    if wanted == 0 {
        return (out, skipped);
    }
    let mut rhs = |_: f64, x: &[f64; 3]| field.eval(*x);
    let mut prev = (0.0, seed, level(&seed));
    let opts = OdeOptions { h_max: 0.5, ..OdeOptions::with_tol(tol) };
    let _ = integrate(
        |_, x| field.eval(*x),
        0.0,
        seed,
        tau_max,
        &opts,
        |t, x, _| {
            let lv = level(x);
            if lv != prev.2 {
                let target = plane.value + TAU * lv.max(prev.2);
                let (t0, x0) = (prev.0, prev.1);
                let mut tau = t0 + (t - t0) * (target - x0[a]) / (x[a] - x0[a]);
                for _ in 0..30 {
                    let y = advance(&mut rhs, t0, &x0, tau - t0);
                    let d = rhs(tau, &y)[a];
                    if d.abs() < TRANSVERSALITY {
                        break;
                    }
                    let next = tau - (y[a] - target) / d;
                    let done = (next - tau).abs() <= 1e-14 * tau.abs().max(1.0);
                    tau = next;
                    if done {
                        break;
                    }
                }
                let y = advance(&mut rhs, t0, &x0, tau - t0);
                let normal = rhs(tau, &y)[a];
                if normal.abs() < TRANSVERSALITY {
                    skipped += 1;
                } else {
                    let mut point = y.map(|v| v.rem_euclid(TAU));
                    point[a] = plane.value.rem_euclid(TAU);
                    out.push(Crossing { seed_index, tau, point, direction: if normal > 0.0 { 1 } else { -1 } });
                }
            }
            prev = (t, *x, lv);
            if out.len() >= wanted {
                Flow::Stop
            } else {
                Flow::Continue
            }
        },
    );
    (out, skipped)
}
