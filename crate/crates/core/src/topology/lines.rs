use std::f64::consts::PI;

use rayon::prelude::*;

use super::eval::VectorField;
use super::ode::{advance, integrate, Flow, OdeError, OdeOptions};
use super::TopologyError;

const TAU: f64 = 2.0 * PI;

/// Smallest vorticity magnitude accepted at a seed.
pub const STAGNATION: f64 = 1e-10;
/// Return distance in T³ that counts as closure.
pub const CLOSURE_TOL: f64 = 1e-6;
/// Allowed distance of a winding from the nearest integer.
pub const WINDING_GUARD: f64 = 0.1;

/// Representative of `x` modulo 2π in (−π, π].
pub fn wrap_pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

fn wrap3(d: [f64; 3]) -> [f64; 3] {
    d.map(wrap_pi)
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Detected return of a line to its seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Closure {
    pub period: f64,
    /// Lift displacement over one period.
    pub displacement: [f64; 3],
    /// Distance in T³ between the seed and the refined return point.
    pub residual: f64,
}

/// Integral curve of a field on the universal cover.
#[derive(Clone, Debug, PartialEq)]
pub struct VortexLine {
    pub seed: [f64; 3],
    pub taus: Vec<f64>,
    pub points: Vec<[f64; 3]>,
    pub closure: Option<Closure>,
    pub tol: f64,
    /// Reason the trace stopped before `τ_max`, if it did.
    pub truncated: Option<String>,
}

impl VortexLine {
    /// Lift displacement from the seed to the last sample.
    pub fn displacement(&self) -> [f64; 3] {
        let last = self.points.last().copied().unwrap_or(self.seed);
        [0, 1, 2].map(|a| last[a] - self.seed[a])
    }
}

/// Follows the integral curve through `seed` up to `tau_max`, stopping at
/// the first closure.
pub fn trace_vortex_line(
    field: &dyn VectorField,
    seed: [f64; 3],
    tau_max: f64,
    tol: f64,
) -> Result<VortexLine, TopologyError> {
    if !(tol >= 1e-12) {
        return Err(TopologyError::BadTolerance(tol));
    }
    let w0 = field.eval(seed);
    let speed = norm(w0);
    if speed < STAGNATION {
        return Err(TopologyError::StagnantSeed { seed, magnitude: speed });
    }
    let normal = w0.map(|c| c / speed);
    let mut rhs = |_: f64, x: &[f64; 3]| field.eval(*x);
    let mut taus = vec![0.0];
    let mut points = vec![seed];
    let mut closure = None;
    let mut prev = (0.0, seed);
    let mut prev_side = 0.0;
    let mut travelled = 0.0;
    let opts = OdeOptions { h_init: 0.1 / speed, h_max: 0.5 / speed, ..OdeOptions::with_tol(tol) };
    let result = integrate(
        |_, x| field.eval(*x),
        0.0,
        seed,
        tau_max,
        &opts,
        |t, x, _| {
            let step_len = norm([0, 1, 2].map(|a| x[a] - prev.1[a]));
            travelled += step_len;
            let d = wrap3([0, 1, 2].map(|a| x[a] - seed[a]));
            let side = dot(d, normal);
            let near = norm(d) < 1.0 + step_len;
            if near && prev_side < 0.0 && side >= 0.0 && travelled > 1e-3 {
                if let Some(c) = refine_return(&mut rhs, prev, t, seed, normal) {
                    if c.residual < CLOSURE_TOL {
                        taus.push(c.period);
                        points.push([0, 1, 2].map(|a| seed[a] + c.displacement[a]));
                        closure = Some(c);
                        return Flow::Stop;
                    }
                }
            }
            prev_side = side;
            prev = (t, *x);
            taus.push(t);
            points.push(*x);
            Flow::Continue
        },
    );
    let truncated = result.err().map(|e: OdeError| e.to_string());
    Ok(VortexLine { seed, taus, points, closure, tol, truncated })
}

/// Newton iteration for the crossing of the plane through `seed` normal to
/// `normal`, inside the step that starts at `start` and ends at `t_end`.
fn refine_return(
    rhs: &mut impl FnMut(f64, &[f64; 3]) -> [f64; 3],
    start: (f64, [f64; 3]),
    t_end: f64,
    seed: [f64; 3],
    normal: [f64; 3],
) -> Option<Closure> {
    let (t0, x0) = start;
    let side = |x: &[f64; 3]| dot(wrap3([0, 1, 2].map(|a| x[a] - seed[a])), normal);
    let mut tau = t_end;
    for _ in 0..30 {
        let x = advance(rhs, t0, &x0, tau - t0);
        let s = side(&x);
        let ds = dot(rhs(tau, &x), normal);
        if ds.abs() < 1e-300 {
            return None;
        }
        let next = tau - s / ds;
        let converged = (next - tau).abs() <= 1e-14 * tau.abs().max(1.0);
        tau = next;
        if converged {
            break;
        }
    }
    if !(tau > t0 - 1e-12 && tau <= t_end + (t_end - t0)) {
        return None;
    }
    let x = advance(rhs, t0, &x0, tau - t0);
    let d = [0, 1, 2].map(|a| x[a] - seed[a]);
    Some(Closure { period: tau, displacement: d, residual: norm(wrap3(d)) })
}

/// Topological type of a traced line.
#[derive(Clone, Debug, PartialEq)]
pub enum WindingReport {
    /// Closed line; contractible iff the winding vector vanishes.
    Closed {
        winding: [i64; 3],
        period: f64,
    },
    /// Open line with a coordinate that advances monotonically by at least
    /// one full turn, hence non-contractible.
    Open {
        monotone_axis: usize,
        direction: [f64; 3],
        displacement: [f64; 3],
    },
    Undetermined {
        reason: String,
        displacement: [f64; 3],
    },
}

impl WindingReport {
    /// `None` when undetermined.
    pub fn is_contractible(&self) -> Option<bool> {
        match self {
            WindingReport::Closed { winding, .. } => Some(*winding == [0, 0, 0]),
            WindingReport::Open { .. } => Some(false),
            WindingReport::Undetermined { .. } => None,
        }
    }

    /// Net lift displacement (`2π × winding` for closed lines).
    pub fn displacement(&self) -> [f64; 3] {
        match self {
            WindingReport::Closed { winding, .. } => winding.map(|w| w as f64 * TAU),
            WindingReport::Open { displacement, .. } | WindingReport::Undetermined { displacement, .. } => {
                *displacement
            }
        }
    }
}

pub fn winding_classification(line: &VortexLine) -> WindingReport {
    if let Some(c) = line.closure {
        let turns = c.displacement.map(|d| d / TAU);
        let rounded = turns.map(f64::round);
        if turns.iter().zip(&rounded).any(|(t, r)| (t - r).abs() > WINDING_GUARD) {
            return WindingReport::Undetermined {
                reason: format!("closure displacement {:?} is not a lattice vector", c.displacement),
                displacement: c.displacement,
            };
        }
        return WindingReport::Closed { winding: rounded.map(|r| r as i64), period: c.period };
    }
    let displacement = line.displacement();
    let best = (0..3)
        .filter(|&a| displacement[a].abs() >= TAU && is_monotone(&line.points, a))
        .max_by(|&a, &b| displacement[a].abs().total_cmp(&displacement[b].abs()));
    match best {
        Some(axis) => {
            let len = norm(displacement);
            WindingReport::Open { monotone_axis: axis, direction: displacement.map(|d| d / len), displacement }
        }
        None => WindingReport::Undetermined {
            reason: match &line.truncated {
                Some(r) => format!("no closure or monotone coordinate; trace truncated: {r}"),
                None => "no closure or monotone coordinate within the horizon".to_string(),
            },
            displacement,
        },
    }
}

fn is_monotone(points: &[[f64; 3]], axis: usize) -> bool {
    let inc = points.windows(2).all(|p| p[1][axis] > p[0][axis]);
    let dec = points.windows(2).all(|p| p[1][axis] < p[0][axis]);
    inc || dec
}

/// Aggregate conclusion over a seed set.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    AllNonContractible,
    ContractibleFound {
        seed_index: usize,
    },
    UndeterminedFraction(f64),
    /// More than the allowed fraction of lines could not be classified.
    Withheld(f64),
}

/// Largest undetermined fraction for which a verdict is issued.
pub const UNDETERMINED_LIMIT: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct StructureSummary {
    pub seeds: Vec<[f64; 3]>,
    /// `Err` for seeds that were rejected before tracing.
    pub reports: Vec<Result<WindingReport, TopologyError>>,
    pub verdict: Verdict,
}

impl StructureSummary {
    pub fn undetermined_fraction(&self) -> f64 {
        let bad = self.reports.iter().filter(|r| !matches!(r, Ok(w) if w.is_contractible().is_some())).count();
        bad as f64 / self.reports.len().max(1) as f64
    }
}

/// Traces every seed and aggregates the per-line classifications.
pub fn classify_structures(field: &dyn VectorField, seeds: &[[f64; 3]], tau_max: f64, tol: f64) -> StructureSummary {
    let reports: Vec<Result<WindingReport, TopologyError>> = seeds
        .par_iter()
        .map(|&s| trace_vortex_line(field, s, tau_max, tol).map(|l| winding_classification(&l)))
        .collect();
    let mut summary = StructureSummary { seeds: seeds.to_vec(), reports, verdict: Verdict::AllNonContractible };
    let f = summary.undetermined_fraction();
    let found = summary.reports.iter().position(|r| matches!(r, Ok(w) if w.is_contractible() == Some(true)));
    summary.verdict = match found {
        _ if f > UNDETERMINED_LIMIT => Verdict::Withheld(f),
        Some(seed_index) => Verdict::ContractibleFound { seed_index },
        None if f > 0.0 => Verdict::UndeterminedFraction(f),
        None => Verdict::AllNonContractible,
    };
    summary
}

/// Deterministic Kronecker lattice of `count` points in [0, 2π)³.
pub fn lattice_seeds(count: usize) -> Vec<[f64; 3]> {
    // Reciprocals of powers of the plastic-number analogue in three dimensions.
    let g = 1.220_744_084_605_759_5_f64;
    let alpha = [1.0 / g, 1.0 / (g * g), 1.0 / (g * g * g)];
    (0..count).map(|i| alpha.map(|a| TAU * (0.5 + a * (i as f64 + 1.0)).fract())).collect()
}
