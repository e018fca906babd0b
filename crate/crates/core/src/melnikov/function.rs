use std::f64::consts::PI;

use rayon::prelude::*;

use super::fields::{build_omega0, build_u0, vorticity_bracket, Bracket};
use super::profile::{ProfileH, ResonanceTarget};
use super::MelnikovError;
use crate::spectral::Grid;
use crate::stability::log_log_slope;
use crate::topology::{SparseField, VectorField};

/// Trapezoid nodes per unit of `q` on the first pass.
pub const NODE_DENSITY: usize = 64;
/// Accepted relative gap between successive quadrature refinements.
pub const QUADRATURE_TOL: f64 = 1e-3;
/// Node doublings attempted before a profile is rejected.
pub const MAX_REFINEMENTS: usize = 3;
/// Relative coefficient size below which bracket modes are not evaluated.
pub const MODE_CUTOFF: f64 = 1e-16;

/// Melnikov integral split by the bracket part it comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MelnikovValue {
    pub linear: f64,
    pub nonlinear: f64,
}

impl MelnikovValue {
    pub fn total(&self) -> f64 {
        self.linear + self.nonlinear
    }
}

/// Bracket fields prepared for evaluation along the unperturbed orbits of a
/// resonant torus.
pub struct MelnikovProblem {
    pub target: ResonanceTarget,
    pub m: f64,
    pub nu: f64,
    pub eps: f64,
    h: ProfileH,
    linear: SparseField,
    nonlinear: SparseField,
}

impl MelnikovProblem {
    /// Synthesizes `u₀`, `ω₀` and their bracket on `grid`.
    pub fn new(
        target: ResonanceTarget,
        m: f64,
        nu: f64,
        eps: f64,
        h: ProfileH,
        grid: Grid,
    ) -> Result<Self, MelnikovError> {
        if !(nu.is_finite() && nu >= 0.0) {
            return Err(MelnikovError::BadParameter { name: "nu", value: nu });
        }
        let omega0 = build_omega0(m, eps, &h, grid)?;
        let u0 = build_u0(m, eps, &h, grid)?;
        let bracket = vorticity_bracket(&u0, &omega0, nu);
        Ok(Self::from_bracket(target, m, nu, eps, h, &bracket))
    }

    pub fn from_bracket(target: ResonanceTarget, m: f64, nu: f64, eps: f64, h: ProfileH, bracket: &Bracket) -> Self {
        MelnikovProblem {
            target,
            m,
            nu,
            eps,
            h,
            linear: SparseField::with_cutoff(&bracket.linear, 1.0, MODE_CUTOFF),
            nonlinear: SparseField::with_cutoff(&bracket.nonlinear, 1.0, MODE_CUTOFF),
        }
    }

    pub fn profile_h(&self) -> &ProfileH {
        &self.h
    }

    /// `(p/q) F₃ / (M sin X₃)` at orbit parameter `s`, with `F` the bracket
    /// part pushed forward to shifted coordinates.
    fn integrand(&self, part: &SparseField, xi: f64, x2_0: f64, s: f64) -> f64 {
        let (p, q) = (self.target.p as f64, self.target.q as f64);
        let height = self.target.height();
        let x1 = s + xi;
        let x2 = x2_0 + p / q * s;
        let x = [x1, x2, height - self.eps * self.h.value(x1, x2)];
        let b = part.eval(x);
        let g = self.h.gradient(x1, x2);
        let f3 = b[2] + self.eps * (g[0] * b[0] + g[1] * b[1]);
        p / q * f3 / (self.m * height.sin())
    }

    /// Trapezoid rule with `nodes` points on one orbit period; returns the
    /// value and the integral of `|integrand|`.
    fn quadrature(&self, part: &SparseField, xi: f64, x2_0: f64, nodes: usize) -> (f64, f64) {
        let ds = self.target.orbit_period() / nodes as f64;
        let mut acc = 0.0;
        let mut mass = 0.0;
        for j in 0..nodes {
            let v = self.integrand(part, xi, x2_0, j as f64 * ds);
            acc += v;
            mass += v.abs();
        }
        (acc * ds, mass * ds)
    }

    /// Melnikov value at phase `xi` for orbits through `X₂⁰ = x2_0`.
    pub fn evaluate(&self, xi: f64, x2_0: f64, nodes: usize) -> MelnikovValue {
        MelnikovValue {
            linear: self.quadrature(&self.linear, xi, x2_0, nodes).0,
            nonlinear: self.quadrature(&self.nonlinear, xi, x2_0, nodes).0,
        }
    }

    /// First-pass node count.
    pub fn base_nodes(&self) -> usize {
        NODE_DENSITY * self.target.q as usize
    }

    /// Profile on `samples` equispaced phases in `[0, 2π/p)`.
    pub fn profile(&self, samples: usize) -> Result<MelnikovProfile, MelnikovError> {
        let period = self.target.xi_period();
        let xi: Vec<f64> = (0..samples).map(|i| i as f64 * period / samples as f64).collect();
        self.profile_at(&xi, 0.0)
    }

    /// Profile at arbitrary phases, refining the quadrature until two
    /// successive node counts agree to [`QUADRATURE_TOL`].
    pub fn profile_at(&self, xi: &[f64], x2_0: f64) -> Result<MelnikovProfile, MelnikovError> {
        let run = |nodes: usize| -> Vec<(MelnikovValue, f64)> {
            xi.par_iter()
                .map(|&x| {
                    let (l, ml) = self.quadrature(&self.linear, x, x2_0, nodes);
                    let (n, mn) = self.quadrature(&self.nonlinear, x, x2_0, nodes);
                    (MelnikovValue { linear: l, nonlinear: n }, ml + mn)
                })
                .collect()
        };
        let mut nodes = self.base_nodes();
        let mut coarse = run(nodes);
        let mut estimate = f64::INFINITY;
        for _ in 0..=MAX_REFINEMENTS {
            nodes *= 2;
            let fine = run(nodes);
            let peak = fine.iter().map(|(v, _)| v.total().abs()).fold(0.0, f64::max);
            let mass = fine.iter().map(|(_, m)| *m).fold(0.0, f64::max);
            let gap = coarse.iter().zip(&fine).map(|(a, b)| (a.0.total() - b.0.total()).abs()).fold(0.0, f64::max);
            let scale = peak.max(1e-12 * mass);
            estimate = if gap == 0.0 { 0.0 } else { gap / scale };
            coarse = fine;
            if estimate <= QUADRATURE_TOL {
                break;
            }
        }
        if estimate > QUADRATURE_TOL {
            return Err(MelnikovError::Quadrature { estimate });
        }
        let values: Vec<MelnikovValue> = coarse.iter().map(|(v, _)| *v).collect();
        Ok(MelnikovProfile {
            target: self.target,
            xi: xi.to_vec(),
            numeric: values.iter().map(MelnikovValue::total).collect(),
            linear: values.iter().map(|v| v.linear).collect(),
            nonlinear: values.iter().map(|v| v.nonlinear).collect(),
            closed_form: xi.iter().map(|&x| closed_form(self.target, self.nu, self.eps, x)).collect(),
            nodes,
            quadrature_estimate: estimate,
        })
    }
}

/// Sampled Melnikov function with its closed-form reference.
#[derive(Clone, Debug, PartialEq)]
pub struct MelnikovProfile {
    pub target: ResonanceTarget,
    pub xi: Vec<f64>,
    pub numeric: Vec<f64>,
    pub linear: Vec<f64>,
    pub nonlinear: Vec<f64>,
    pub closed_form: Vec<f64>,
    /// Node count of the accepted quadrature.
    pub nodes: usize,
    pub quadrature_estimate: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl MelnikovProfile {
    pub fn peak(&self) -> f64 {
        max_abs(&self.numeric)
    }

    /// `max |numeric − closed form| / max |closed form|`.
    pub fn relative_deviation(&self) -> f64 {
        let d: Vec<f64> = self.numeric.iter().zip(&self.closed_form).map(|(a, b)| a - b).collect();
        max_abs(&d) / max_abs(&self.closed_form)
    }

    /// `max |nonlinear part| / max |numeric|`.
    pub fn nonlinear_fraction(&self) -> f64 {
        max_abs(&self.nonlinear) / self.peak()
    }

    /// Sample mean, which is the period average for equispaced phases.
    pub fn mean(&self) -> f64 {
        self.numeric.iter().sum::<f64>() / self.numeric.len().max(1) as f64
    }

    /// Rows `(ξ, numeric, closed form, |difference|)`.
    pub fn rows(&self) -> Vec<[f64; 4]> {
        (0..self.xi.len())
            .map(|i| [self.xi[i], self.numeric[i], self.closed_form[i], (self.numeric[i] - self.closed_form[i]).abs()])
            .collect()
    }
}

/// `−(2πνε² p (p² + q²)² / q) sin(2pξ)`, the leading term for the resonant
/// cosine profile.
pub fn closed_form(target: ResonanceTarget, nu: f64, eps: f64, xi: f64) -> f64 {
    let (p, q) = (target.p as f64, target.q as f64);
    -2.0 * PI * nu * eps * eps * p * (p * p + q * q).powi(2) / q * (2.0 * p * xi).sin()
}

/// Order-ε² Melnikov integral computed from derivatives of `h` alone.
pub fn leading_order(target: ResonanceTarget, nu: f64, eps: f64, h: &ProfileH, xi: f64, nodes: usize) -> f64 {
    let (p, q) = (target.p as f64, target.q as f64);
    let r = p / q;
    let ds = target.orbit_period() / nodes as f64;
    let mut acc = 0.0;
    for j in 0..nodes {
        let s = j as f64 * ds;
        let (x1, x2) = (s + xi, r * s);
        let g = h.gradient(x1, x2);
        let [h11, h12, h22] = h.hessian(x1, x2);
        acc += g[1] * h22 + g[0] * h12 - r * g[1] * h12 - r * g[0] * h11;
    }
    2.0 * p * nu * eps * eps / q * acc * ds
}

/// Zero bracketing tolerance in `ξ`.
pub const ZERO_TOL: f64 = 1e-8;
/// Zeros with slope below this fraction of the largest slope are degenerate.
pub const DEGENERACY: f64 = 1e-3;
/// Minimum samples per `2π` of phase, times `p`.
pub const MIN_SAMPLES_PER_P: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MelnikovZero {
    pub xi: f64,
    pub slope: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroSet {
    pub zeros: Vec<MelnikovZero>,
    pub period: f64,
}

impl ZeroSet {
    pub fn count(&self) -> usize {
        self.zeros.len()
    }

    pub fn all_simple(&self) -> bool {
        self.zeros.iter().all(|z| !z.degenerate)
    }

    /// Slopes change sign between cyclically consecutive zeros.
    pub fn alternating(&self) -> bool {
        let n = self.zeros.len();
        n % 2 == 0 && (0..n).all(|i| self.zeros[i].slope * self.zeros[(i + 1) % n].slope < 0.0)
    }

    /// Circular distance from `xi` to the nearest zero.
    pub fn distance_to_nearest(&self, xi: f64) -> f64 {
        self.zeros
            .iter()
            .map(|z| {
                let d = (xi - z.xi).rem_euclid(self.period);
                d.min(self.period - d)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sign-change bracketing on the sampled profile, bisection on `f`, and a
/// centred-difference slope at each zero.
pub fn find_zeros(profile: &MelnikovProfile, f: impl Fn(f64) -> f64 + Sync) -> Result<ZeroSet, MelnikovError> {
    let period = profile.target.xi_period();
    let n = profile.xi.len();
    let needed = MIN_SAMPLES_PER_P * profile.target.p as usize;
    if n < needed {
        return Err(MelnikovError::TooFewSamples { found: n, needed });
    }
    let v = &profile.numeric;
    let peak = max_abs(v);
    if !(peak > 0.0) {
        return Err(MelnikovError::NoIsolatedZeros);
    }
    let floor = 1e-12 * peak;
    let step = period / n as f64;
    let max_slope = (0..n).map(|i| (v[(i + 1) % n] - v[i]).abs() / step).fold(0.0, f64::max);
    let mut candidates = Vec::new();
    for i in 0..n {
        let (a, fa) = (profile.xi[i], v[i]);
        let (b, fb) = if i + 1 < n { (profile.xi[i + 1], v[i + 1]) } else { (profile.xi[0] + period, v[0]) };
        if fa.abs() <= floor {
            candidates.push(a);
        } else if fb.abs() > floor && fa * fb < 0.0 {
            candidates.push(bisect(&f, a, b, fa));
        }
    }
    let delta = step * 1e-2;
    let mut zeros: Vec<MelnikovZero> = candidates
        .par_iter()
        .map(|&z| {
            let slope = (f(z + delta) - f(z - delta)) / (2.0 * delta);
            MelnikovZero { xi: z.rem_euclid(period), slope, degenerate: slope.abs() < DEGENERACY * max_slope }
        })
        .collect();
    zeros.sort_by(|a, b| a.xi.total_cmp(&b.xi));
    zeros.dedup_by(|a, b| (a.xi - b.xi).abs() < 1e-6);
    if zeros.len() > 1 && period - zeros.last().map_or(0.0, |z| z.xi) + zeros[0].xi < 1e-6 {
        zeros.pop();
    }
    Ok(ZeroSet { zeros, period })
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    while b - a > ZERO_TOL {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// Log-log slope of the profile peak against a swept parameter.
pub fn peak_slope(parameters: &[f64], peaks: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = parameters.iter().copied().zip(peaks.iter().copied()).collect();
    log_log_slope(&pts)
}
