use std::f64::consts::PI;

use rayon::prelude::*;

use super::fields::{early_vorticity, vorticity_bracket};
use super::function::MODE_CUTOFF;
use super::profile::ResonanceTarget;
use super::MelnikovError;
use crate::spectral::FourierField;
use crate::topology::ode::dopri_step;
use crate::topology::{SparseField, VectorField};

type Field = FourierField<f64>;

const TAU: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BreakdownOptions {
    /// Section points scanned across one orbit spacing `2π/q`.
    pub scan: usize,
    /// Fixed integration steps per turn in `x₁`.
    pub steps_per_turn: usize,
    /// Finite-difference step of the return-map differential.
    pub fd_step: f64,
    /// Displacement norm accepted at a fixed point.
    pub newton_tol: f64,
    /// Scan residuals below this mean the resonant circle is still fixed.
    pub unbroken_floor: f64,
}

impl Default for BreakdownOptions {
    fn default() -> Self {
        BreakdownOptions { scan: 16, steps_per_turn: 256, fd_step: 1e-6, newton_tol: 1e-10, unbroken_floor: 1e-9 }
    }
}

/// `q`-th return to the section `x₁ = 0` along lines of a vorticity field
/// with positive first component, written as `dx/dx₁ = ω/ω₁`.
pub struct ReturnMap<'a> {
    field: &'a dyn VectorField,
    target: ResonanceTarget,
    steps: usize,
}

/// Follows `dx/dx₁ = ω/ω₁` from `(0, y)` through `turns` turns in `x₁` with a
/// fixed step, so the result is a smooth function of `y`.
fn flow_turns(
    field: &dyn VectorField,
    y: [f64; 2],
    turns: usize,
    steps_per_turn: usize,
) -> Result<[f64; 2], MelnikovError> {
    let mut transverse = Ok(());
    let mut rhs = |x1: f64, y: &[f64; 2]| {
        let w = field.eval([x1, y[0], y[1]]);
        if !(w[0] > 0.0) && transverse.is_ok() {
            transverse = Err(MelnikovError::NonTransverse { x1 });
        }
        [w[1] / w[0], w[2] / w[0]]
    };
    let steps = steps_per_turn * turns;
    let h = TAU / steps_per_turn as f64;
    let mut state = y;
    let mut k1 = rhs(0.0, &state);
    for i in 0..steps {
        let (next, k7, _) = dopri_step(&mut rhs, i as f64 * h, &state, &k1, h);
        state = next;
        k1 = k7;
    }
    transverse?;
    Ok(state)
}

impl<'a> ReturnMap<'a> {
    pub fn new(field: &'a dyn VectorField, target: ResonanceTarget, steps_per_turn: usize) -> Self {
        ReturnMap { field, target, steps: steps_per_turn.max(8) * target.q as usize }
    }

    /// Section point `(x₂, x₃)` after `q` turns, with `x₂` shifted back by `2πp`.
    pub fn image(&self, y: [f64; 2]) -> Result<[f64; 2], MelnikovError> {
        let z = flow_turns(self.field, y, self.target.q as usize, self.steps / self.target.q as usize)?;
        Ok([z[0] - TAU * self.target.p as f64, z[1]])
    }

    /// `image(y) − y`.
    pub fn displacement(&self, y: [f64; 2]) -> Result<[f64; 2], MelnikovError> {
        let z = self.image(y)?;
        Ok([z[0] - y[0], z[1] - y[1]])
    }

    /// Differential of the map by centred differences with one Richardson
    /// refinement; rows index the image component.
    pub fn jacobian(&self, y: [f64; 2], step: f64) -> Result<[[f64; 2]; 2], MelnikovError> {
        let central = |h: f64| -> Result<[[f64; 2]; 2], MelnikovError> {
            let mut j = [[0.0; 2]; 2];
            for c in 0..2 {
                let mut yp = y;
                let mut ym = y;
                yp[c] += h;
                ym[c] -= h;
                let (fp, fm) = (self.image(yp)?, self.image(ym)?);
                for r in 0..2 {
                    j[r][c] = (fp[r] - fm[r]) / (2.0 * h);
                }
            }
            Ok(j)
        };
        let coarse = central(step)?;
        let fine = central(step / 2.0)?;
        let mut j = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                j[r][c] = (4.0 * fine[r][c] - coarse[r][c]) / 3.0;
            }
        }
        Ok(j)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixedPointKind {
    Elliptic,
    Hyperbolic,
    /// Trace within roundoff of ±2.
    Parabolic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPoint {
    /// `(x₂, x₃)` on the section `x₁ = 0`.
    pub section: [f64; 2],
    /// Orbit phase, comparable with Melnikov zeros.
    pub xi: f64,
    pub kind: FixedPointKind,
    pub trace: f64,
    /// Eigenvalues of the differential as `(re, im)` pairs.
    pub eigenvalues: [[f64; 2]; 2],
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BreakdownStatus {
    /// The whole resonant circle is fixed to within the floor.
    Unbroken { max_residual: f64 },
    /// Isolated fixed points were found.
    Broken,
    /// No fixed point converged; the scan data is kept in the report.
    Unresolved,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BreakdownReport {
    pub target: ResonanceTarget,
    pub t_probe: f64,
    pub status: BreakdownStatus,
    pub fixed_points: Vec<FixedPoint>,
    /// Scan samples `(x₂, residual)` of the reduced return displacement.
    pub scan: Vec<[f64; 2]>,
}

impl BreakdownReport {
    pub fn count(&self, kind: FixedPointKind) -> usize {
        self.fixed_points.iter().filter(|f| f.kind == kind).count()
    }
}

/// Height on the section where the return map has no `x₂` drift, and the
/// remaining `x₃` displacement there.
fn twist_solve(map: &ReturnMap, x2: f64, guess: f64) -> Result<(f64, f64), MelnikovError> {
    let mut b0 = guess;
    let mut b1 = guess + 1e-3;
    let mut d0 = map.displacement([x2, b0])?;
    let mut d1 = map.displacement([x2, b1])?;
    for _ in 0..20 {
        if d1[0] == d0[0] {
            break;
        }
        let b2 = b1 - d1[0] * (b1 - b0) / (d1[0] - d0[0]);
        b0 = b1;
        d0 = d1;
        b1 = b2;
        d1 = map.displacement([x2, b1])?;
        if d1[0].abs() < 1e-13 || (b1 - b0).abs() < 1e-14 {
            break;
        }
    }
    Ok((b1, d1[1]))
}

fn eigen2(j: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        [[tr / 2.0 + r, 0.0], [tr / 2.0 - r, 0.0]]
    } else {
        let r = (-disc).sqrt();
        [[tr / 2.0, r], [tr / 2.0, -r]]
    }
}

fn polish(map: &ReturnMap, mut y: [f64; 2], opts: &BreakdownOptions) -> Result<Option<([f64; 2], f64)>, MelnikovError> {
    let mut d = map.displacement(y)?;
    for _ in 0..6 {
        let res = d[0].hypot(d[1]);
        if res <= opts.newton_tol {
            return Ok(Some((y, res)));
        }
        let mut j = map.jacobian(y, opts.fd_step)?;
        j[0][0] -= 1.0;
        j[1][1] -= 1.0;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 {
            return Ok(None);
        }
        let dx = (-d[0] * j[1][1] + d[1] * j[0][1]) / det;
        let dy = (-j[0][0] * d[1] + j[1][0] * d[0]) / det;
        y = [y[0] + dx, y[1] + dy];
        d = map.displacement(y)?;
    }
    let res = d[0].hypot(d[1]);
    Ok((res <= opts.newton_tol).then_some((y, res)))
}

/// Fixed points of the `q`-th return map near the resonant circle, found by
/// bracketing the reduced displacement along the circle and polishing with
/// Newton, then classified by the trace of the differential.
pub fn breakdown_diagnostic(
    vorticity: &dyn VectorField,
    t_probe: f64,
    target: ResonanceTarget,
    opts: &BreakdownOptions,
) -> Result<BreakdownReport, MelnikovError> {
    let map = ReturnMap::new(vorticity, target, opts.steps_per_turn);
    let spacing = TAU / target.q as f64;
    let k = opts.scan.max(4);
    let height = target.height();
    let xs: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) * spacing / k as f64).collect();
    let reduced = |x2: f64| twist_solve(&map, x2, height);
    let samples: Vec<(f64, f64)> = xs.par_iter().map(|&x| reduced(x)).collect::<Result<_, _>>()?;
    let scan: Vec<[f64; 2]> = xs.iter().zip(&samples).map(|(&x, &(_, r))| [x, r]).collect();
    let max_residual = samples.iter().fold(0.0f64, |m, s| m.max(s.1.abs()));
    let mut report =
        BreakdownReport { target, t_probe, status: BreakdownStatus::Unresolved, fixed_points: Vec::new(), scan };
    if max_residual <= opts.unbroken_floor {
        report.status = BreakdownStatus::Unbroken { max_residual };
        return Ok(report);
    }
    let brackets: Vec<(f64, f64, f64, f64)> = (0..k)
        .filter_map(|i| {
            let (a, fa) = (xs[i], samples[i].1);
            let (b, fb) = if i + 1 < k { (xs[i + 1], samples[i + 1].1) } else { (xs[0] + spacing, samples[0].1) };
            (fa * fb < 0.0).then_some((a, b, fa, fb))
        })
        .collect();
    let found: Vec<Option<FixedPoint>> = brackets
        .par_iter()
        .map(|&(a, b, fa, fb)| -> Result<Option<FixedPoint>, MelnikovError> {
            let x2 = regula_falsi(|x| reduced(x).map(|s| s.1), a, b, fa, fb)?;
            let (x3, _) = reduced(x2)?;
            let Some((y, residual)) = polish(&map, [x2, x3], opts)? else {
                return Ok(None);
            };
            let j = map.jacobian(y, opts.fd_step)?;
            let trace = j[0][0] + j[1][1];
            let kind = if (trace.abs() - 2.0).abs() < 1e-12 {
                FixedPointKind::Parabolic
            } else if trace.abs() < 2.0 {
                FixedPointKind::Elliptic
            } else {
                FixedPointKind::Hyperbolic
            };
            let section = [y[0].rem_euclid(spacing), y[1]];
            Ok(Some(FixedPoint {
                section,
                xi: target.xi_of_section(y[0]),
                kind,
                trace,
                eigenvalues: eigen2(j),
                residual,
            }))
        })
        .collect::<Result<_, _>>()?;
    report.fixed_points = found.into_iter().flatten().collect();
    report.fixed_points.sort_by(|a, b| a.section[0].total_cmp(&b.section[0]));
    if !report.fixed_points.is_empty() {
        report.status = BreakdownStatus::Broken;
    }
    Ok(report)
}

/// Illinois variant of regula falsi on a sign-changing bracket.
fn regula_falsi(
    f: impl Fn(f64) -> Result<f64, MelnikovError>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
) -> Result<f64, MelnikovError> {
    let mut side = 0;
    for _ in 0..60 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c)?;
        if fc == 0.0 || (b - a).abs() < 1e-12 {
            return Ok(c);
        }
        if fc * fb < 0.0 {
            a = b;
            fa = fb;
            side = 0;
        } else {
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        b = c;
        fb = fc;
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    Ok(b)
}

/// Pointwise evaluator of the first-order vorticity at `t_probe`.
pub fn probe_vorticity(u0: &Field, nu: f64, t_probe: f64) -> SparseField {
    let omega0 = u0.curl();
    SparseField::with_cutoff(&early_vorticity(u0, &omega0, nu, t_probe), 1.0, MODE_CUTOFF)
}

/// Probe time at which the first-order term is `ratio` of `‖ω₀‖`.
pub fn probe_time(u0: &Field, nu: f64, ratio: f64) -> f64 {
    let omega0 = u0.curl();
    let b = vorticity_bracket(u0, &omega0, nu).total();
    ratio * omega0.l2_norm() / b.l2_norm()
}

/// Largest flux accepted through a closed coordinate torus.
pub const FLUX_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    /// Flux of `ω` through the tori `{x_a = 0}`.
    pub fluxes: [f64; 3],
    pub heights: Vec<f64>,
    pub rotation: Vec<f64>,
    /// Rotation numbers strictly decrease with height.
    pub monotone: bool,
}

/// Flux of `omega` through each coordinate torus `{x_a = 0}` by the
/// trapezoid rule on the grid.
pub fn torus_fluxes(omega: &Field) -> [f64; 3] {
    let n = omega.grid().n();
    let p = omega.to_physical();
    let cell = (TAU / n as f64).powi(2);
    let mut flux = [0.0; 3];
    for i in 0..n {
        for j in 0..n {
            flux[0] += p[0][i * n + j];
            flux[1] += p[1][i * n * n + j];
            flux[2] += p[2][i * n * n + j * n];
        }
    }
    flux.map(|f| f * cell)
}

/// Mean advance of `x₂` per unit `x₁` over `turns` turns from `(0, 0, z)`.
pub fn rotation_numbers(
    field: &dyn VectorField,
    heights: &[f64],
    turns: usize,
    steps_per_turn: usize,
) -> Result<Vec<f64>, MelnikovError> {
    let scale = TAU * turns as f64;
    heights.par_iter().map(|&z| flow_turns(field, [0.0, z], turns, steps_per_turn).map(|y| y[0] / scale)).collect()
}

/// Heights strictly inside the window `(π/4, 3π/8)`.
pub fn window_heights(count: usize) -> Vec<f64> {
    let (lo, hi) = (PI / 4.0, 3.0 * PI / 8.0);
    (1..=count).map(|i| lo + (hi - lo) * i as f64 / (count + 1) as f64).collect()
}

/// Zero flux of `curl u` through the coordinate tori, and monotone rotation
/// numbers of its lines across `heights`.
pub fn exactness_and_twist_audit(u: &Field, heights: &[f64], turns: usize) -> Result<AuditReport, MelnikovError> {
    vorticity_audit(&u.curl(), heights, turns)
}

/// The audit of [`exactness_and_twist_audit`] for a vorticity given directly.
pub fn vorticity_audit(omega: &Field, heights: &[f64], turns: usize) -> Result<AuditReport, MelnikovError> {
    let fluxes = torus_fluxes(omega);
    let worst = fluxes.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    if worst > FLUX_TOL {
        return Err(MelnikovError::Exactness { flux: worst });
    }
    let field = SparseField::with_cutoff(omega, 1.0, MODE_CUTOFF);
    let rotation = rotation_numbers(&field, heights, turns, 128)?;
    let monotone = rotation.windows(2).all(|w| w[1] < w[0]);
    Ok(AuditReport { fluxes, heights: heights.to_vec(), rotation, monotone })
}
