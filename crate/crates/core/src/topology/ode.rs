//! Dormand–Prince 5(4) integration with step-size control.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    MaxSteps { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions { rtol: tol, atol: tol, h_init: 1e-2, h_min: 1e-12, h_max: f64::INFINITY, max_steps: 10_000_000 }
    }
}

/// Whether the caller wants integration to go on after an accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn comb<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One Dormand–Prince step: fifth-order solution, its derivative, and the
/// embedded error vector.
pub fn dopri_step<const D: usize>(
    f: &mut impl FnMut(f64, &[f64; D]) -> [f64; D],
    t: f64,
    y: &[f64; D],
    k1: &[f64; D],
    h: f64,
) -> ([f64; D], [f64; D], [f64; D]) {
    let k2 = f(t + C2 * h, &comb(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &comb(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &comb(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(t + C5 * h, &comb(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(t + h, &comb(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y5 = comb(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y5);
    let mut err = [0.0; D];
    for i in 0..D {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y5, k7, err)
}

/// Integrates from `t0` towards `t_end` (either direction), calling
/// `on_step(t, y, dy)` after every accepted step. The last step lands on
/// `t_end` exactly. Returns the final time and state.
pub fn integrate<const D: usize>(
    mut f: impl FnMut(f64, &[f64; D]) -> [f64; D],
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    opts: &OdeOptions,
    mut on_step: impl FnMut(f64, &[f64; D], &[f64; D]) -> Flow,
) -> Result<(f64, [f64; D]), OdeError> {
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = opts.h_init.min(opts.h_max).min((t_end - t0).abs());
    let mut steps = 0;
    while (t_end - t) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(OdeError::MaxSteps { t });
        }
        let remaining = (t_end - t).abs();
        let last = h >= remaining;
        let step = if last { remaining } else { h };
        let (y5, k7, err) = dopri_step(&mut f, t, &y, &k1, dir * step);
        let mut norm = 0.0f64;
        for i in 0..D {
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            norm = norm.max((err[i] / sc).abs());
        }
        if !norm.is_finite() {
            if step <= opts.h_min {
                return Err(OdeError::NonFinite { t });
            }
            h = step * 0.1;
            continue;
        }
        if norm <= 1.0 {
            t = if last { t_end } else { t + dir * step };
            y = y5;
            k1 = k7;
            steps += 1;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(OdeError::NonFinite { t });
            }
            if on_step(t, &y, &k1) == Flow::Stop {
                return Ok((t, y));
            }
        }
        let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
        h = (step * factor).min(opts.h_max);
        if norm > 1.0 && h < opts.h_min {
            return Err(OdeError::StepUnderflow { t });
        }
    }
    Ok((t, y))
}

/// State at `t + h` from `(t, y)` by a single fifth-order step, used to
/// refine events inside an accepted step.
pub fn advance<const D: usize>(
    f: &mut impl FnMut(f64, &[f64; D]) -> [f64; D],
    t: f64,
    y: &[f64; D],
    h: f64,
) -> [f64; D] {
    if h == 0.0 {
        return *y;
    }
    let k1 = f(t, y);
    dopri_step(f, t, y, &k1, h).0
}
