//! Energy hierarchy, the growth recursion driven by the reference flow, and
//! fitted decay envelopes for perturbations of Beltrami solutions.

use thiserror::Error;

use crate::scalar::Real;
use crate::solver::{DuhamelLedger, Snapshot};
use crate::spectral::{FourierField, Grid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("sigma must lie in (0, 1), got {0}")]
    BadSigma(f64),
    #[error("histories must share the time grid ({expected} samples, found {found})")]
    LengthMismatch { expected: usize, found: usize },
    #[error("order {m} exceeds the recorded order {r}")]
    OrderTooHigh { m: usize, r: usize },
    #[error("envelope violated for every constant up to the cap {cap:e} (worst ratio {ratio:e} at m = {m}, t = {t})")]
    Explosion { cap: f64, ratio: f64, m: usize, t: f64 },
    #[error("at least two sweep samples with positive norms are required")]
    ShortSweep,
    #[error("{term} slope {slope:.3} is farther than {tol} from {expected}")]
    Slope { term: &'static str, slope: f64, expected: f64, tol: f64 },
}

/// `h[i][m] = Σ_{j≤m} ∫|∇ʲv|²` at `times[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyHistory<T: Real> {
    pub r: usize,
    pub times: Vec<T>,
    pub h: Vec<Vec<T>>,
    /// `‖∇v‖ ≥ ‖v‖` at each sample.
    pub poincare: Vec<bool>,
}

impl<T: Real> EnergyHistory<T> {
    pub fn poincare_holds(&self) -> bool {
        self.poincare.iter().all(|&p| p)
    }
}

pub fn energy_history<T: Real>(snapshots: &[Snapshot<T>], r: usize) -> EnergyHistory<T> {
    let mut times = Vec::with_capacity(snapshots.len());
    let mut h = Vec::with_capacity(snapshots.len());
    let mut poincare = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        times.push(s.t);
        h.push(energy_levels(&s.u, r));
        let l2 = s.u.gradient_energy(0);
        let g1 = s.u.gradient_energy(1);
        poincare.push(g1 >= l2 * (T::one() - T::lit(1e-12)));
    }
    EnergyHistory { r, times, h, poincare }
}

/// Cumulative gradient energies `h_0 ≤ … ≤ h_r` of one field.
pub fn energy_levels<T: Real>(v: &FourierField<T>, r: usize) -> Vec<T> {
    let mut acc = T::zero();
    (0..=r)
        .map(|j| {
            acc = acc + v.gradient_energy(j);
            acc
        })
        .collect()
}

/// `‖∇ʲv‖_{L∞}` with the Euclidean norm over all components of the
/// derivative tensor, sampled on a grid refined by `oversample`.
pub fn sup_gradient_norm<T: Real>(v: &FourierField<T>, j: usize, oversample: usize) -> T {
    let fine = Grid::new(v.grid().n() * oversample.max(1)).expect("refined grid is a power of two");
    let vf = v.resample(fine);
    let len = fine.phys_len();
    let mut acc = vec![T::zero(); len];
    for (a, mult) in multi_indices(j) {
        let w = T::from_usize_lossy(mult);
        for c in 0..3 {
            let mut comp = vf.scalar(c);
            for (axis, &count) in a.iter().enumerate() {
                for _ in 0..count {
                    comp = comp.partial(axis);
                }
            }
            for (s, x) in acc.iter_mut().zip(comp.to_physical()) {
                *s = *s + w * x * x;
            }
        }
    }
    acc.into_iter().fold(T::zero(), T::max).sqrt()
}

/// Multisets of size `j` over three axes with their multinomial counts.
fn multi_indices(j: usize) -> Vec<([usize; 3], usize)> {
    let fact = |n: usize| (1..=n).product::<usize>();
    let mut out = Vec::new();
    for a in 0..=j {
        for b in 0..=j - a {
            let c = j - a - b;
            out.push(([a, b, c], fact(j) / (fact(a) * fact(b) * fact(c))));
        }
    }
    out
}

/// `Q_m(t)` for `m ≤ r` on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct QRecursion<T: Real> {
    pub r: usize,
    pub times: Vec<T>,
    /// `q[i][m]`.
    pub q: Vec<Vec<T>>,
}

/// `sup_norms[j - 1][i] = ‖∇ʲw(t_i)‖_{L∞}` for `j = 1..=r`.
///
/// `Q_0 = 1` and `Q_m(t) = 1 + Σ_{l<m} Q_l(t) ∫₀ᵗ ‖∇^{m−l}w‖²_{L∞}` with
/// trapezoid quadrature.
pub fn q_recursion<T: Real>(sup_norms: &[Vec<T>], r: usize, times: &[T]) -> Result<QRecursion<T>, StabilityError> {
    if sup_norms.len() < r {
        return Err(StabilityError::OrderTooHigh { m: r, r: sup_norms.len() });
    }
    for s in &sup_norms[..r] {
        if s.len() != times.len() {
            return Err(StabilityError::LengthMismatch { expected: times.len(), found: s.len() });
        }
    }
    // integrals[j - 1][i] = ∫₀^{t_i} ‖∇ʲw‖².
    let integrals: Vec<Vec<T>> = sup_norms[..r]
        .iter()
        .map(|s| {
            let mut acc = T::zero();
            let mut out = Vec::with_capacity(times.len());
            for i in 0..times.len() {
                if i > 0 {
                    let dt = times[i] - times[i - 1];
                    acc = acc + dt * (s[i] * s[i] + s[i - 1] * s[i - 1]) / T::lit(2.0);
                }
                out.push(acc);
            }
            out
        })
        .collect();
    let q = (0..times.len())
        .map(|i| {
            let mut row = vec![T::one(); r + 1];
            for m in 1..=r {
                let mut v = T::one();
                for l in 0..m {
                    v = v + row[l] * integrals[m - l - 1][i];
                }
                row[m] = v;
            }
            row
        })
        .collect();
    Ok(QRecursion { r, times: times.to_vec(), q })
}

/// Sup-norm histories of `∇ʲw` for `j = 1..=r` from snapshots of `w`.
pub fn sup_norm_histories<T: Real>(snapshots: &[FourierField<T>], r: usize, oversample: usize) -> Vec<Vec<T>> {
    (1..=r).map(|j| snapshots.iter().map(|w| sup_gradient_norm(w, j, oversample)).collect()).collect()
}

/// Trapezoid value of `∫ s(t)² dt` over the sampled window.
pub fn time_integral_sq<T: Real>(times: &[T], s: &[T]) -> T {
    times
        .windows(2)
        .zip(s.windows(2))
        .fold(T::zero(), |acc, (t, v)| acc + (t[1] - t[0]) * (v[0] * v[0] + v[1] * v[1]) / T::lit(2.0))
}

/// Tightest point of a fitted envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeRow<T> {
    pub t: T,
    pub m: usize,
    pub h: T,
    pub q: T,
    /// `Q_m^{1/2} ‖v₀‖_{H^m} e^{−νσt}`.
    pub base: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeReport<T: Real> {
    pub sigma: T,
    /// `‖w‖²_{L²L∞}`.
    pub w_norm: T,
    /// Smallest `C` with `‖v(t)‖_{H^m} ≤ C e^{C‖w‖²} base` on every row.
    pub c_star: T,
    pub rows: Vec<EnvelopeRow<T>>,
    /// Index into `rows` where the fit is tight.
    pub tightest: Option<usize>,
}

impl<T: Real> EnvelopeReport<T> {
    /// Whether the envelope with constant `c` covers every row.
    pub fn holds(&self, c: T) -> bool {
        let g = c * (c * self.w_norm).exp();
        self.rows.iter().all(|r| r.h.sqrt() <= g * r.base * (T::one() + T::lit(1e-12)))
    }
}

/// Largest constant tried before the fit is declared to explode.
pub const ENVELOPE_CAP: f64 = 1e6;

/// Fits the smallest envelope constant for orders `m ≤ m_max`.
pub fn verify_decay_envelope<T: Real>(
    history: &EnergyHistory<T>,
    q: &QRecursion<T>,
    nu: T,
    sigma: T,
    w_norm: T,
    m_max: usize,
) -> Result<EnvelopeReport<T>, StabilityError> {
    if !(sigma > T::zero() && sigma < T::one()) {
        return Err(StabilityError::BadSigma(sigma.as_f64()));
    }
    if m_max > history.r || m_max > q.r {
        return Err(StabilityError::OrderTooHigh { m: m_max, r: history.r.min(q.r) });
    }
    if q.times.len() != history.times.len() {
        return Err(StabilityError::LengthMismatch { expected: history.times.len(), found: q.times.len() });
    }
    let mut rows = Vec::new();
    let mut ratio = T::zero();
    let mut tightest = None;
    for m in 0..=m_max {
        let h0 = history.h[0][m];
        for (i, &t) in history.times.iter().enumerate() {
            let h = history.h[i][m];
            let qm = q.q[i][m];
            let base = qm.sqrt() * h0.sqrt() * (-nu * sigma * t).exp();
            let ratio_here = if h == T::zero() {
                T::zero()
            } else if base == T::zero() {
                T::infinity()
            } else {
                h.sqrt() / base
            };
            rows.push(EnvelopeRow { t, m, h, q: qm, base });
            if ratio_here > ratio || tightest.is_none() && ratio_here > T::zero() {
                ratio = ratio_here;
                tightest = Some(rows.len() - 1);
            }
        }
    }
    if ratio == T::zero() {
        return Ok(EnvelopeReport { sigma, w_norm, c_star: T::zero(), rows, tightest: None });
    }
    let cap = T::lit(ENVELOPE_CAP);
    let g = |c: T| c * (c * w_norm).exp();
    let fail = |rows: &[EnvelopeRow<T>]| {
        let row = &rows[tightest.expect("positive ratio has a row")];
        StabilityError::Explosion { cap: ENVELOPE_CAP, ratio: ratio.as_f64(), m: row.m, t: row.t.as_f64() }
    };
    if !ratio.is_finite() || g(cap) < ratio {
        return Err(fail(&rows));
    }
    let (mut lo, mut hi) = (T::zero(), ratio.min(cap));
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if g(mid) >= ratio {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(EnvelopeReport { sigma, w_norm, c_star: hi, rows, tightest })
}

/// `sup_t ‖v(t)‖_{H^m} e^{νσt}` over a history.
pub fn weighted_sup<T: Real>(history: &EnergyHistory<T>, m: usize, nu: T, sigma: T) -> T {
    history.times.iter().zip(&history.h).map(|(&t, h)| h[m].sqrt() * (nu * sigma * t).exp()).fold(T::zero(), T::max)
}

/// One point of a perturbation sweep: `H^r` norms of the Duhamel terms at `T₁`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinBilSample {
    pub delta1: f64,
    pub n0: f64,
    pub n1: f64,
    pub lin: f64,
    pub bil: f64,
}

impl LinBilSample {
    /// Reads the entry at `t1` (or the last entry before it) from a ledger.
    pub fn from_ledger<T: Real>(
        ledger: &DuhamelLedger<T>,
        delta1: f64,
        n0: f64,
        n1: f64,
        r: usize,
        t1: T,
    ) -> Option<Self> {
        let e = ledger.at(t1).or_else(|| ledger.entries.iter().rev().find(|e| e.t <= t1))?;
        Some(LinBilSample {
            delta1,
            n0,
            n1,
            lin: e.lin.sobolev_norm(r).value.as_f64(),
            bil: e.bil.sobolev_norm(r).value.as_f64(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinBilReport {
    /// `max ‖Lin‖ / (δ₁ N₀⁻²)`.
    pub lin_constant: f64,
    /// `max ‖Bil‖ / (δ₁² N₀^{r+1} N₁^{r+2})`.
    pub bil_constant: f64,
    pub lin_slope: f64,
    pub bil_slope: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Slope tolerance for the δ₁ scalings.
pub const SLOPE_TOLERANCE: f64 = 0.2;

/// Fits the bound constants over a δ₁ sweep and checks the linear and
/// quadratic scalings.
pub fn verify_lin_bil_bounds(samples: &[LinBilSample], r: usize) -> Result<LinBilReport, StabilityError> {
    let rr = r as f64;
    let lin_constant = samples.iter().map(|s| s.lin * s.n0 * s.n0 / s.delta1).fold(0.0, f64::max);
    let bil_constant = samples
        .iter()
        .map(|s| s.bil / (s.delta1 * s.delta1 * s.n0.powf(rr + 1.0) * s.n1.powf(rr + 2.0)))
        .fold(0.0, f64::max);
    let lin_slope = log_log_slope(&samples.iter().map(|s| (s.delta1, s.lin)).collect::<Vec<_>>())
        .ok_or(StabilityError::ShortSweep)?;
    let bil_slope = log_log_slope(&samples.iter().map(|s| (s.delta1, s.bil)).collect::<Vec<_>>())
        .ok_or(StabilityError::ShortSweep)?;
    for (term, slope, expected) in [("Lin", lin_slope, 1.0), ("Bil", bil_slope, 2.0)] {
        if (slope - expected).abs() > SLOPE_TOLERANCE {
            return Err(StabilityError::Slope { term, slope, expected, tol: SLOPE_TOLERANCE });
        }
    }
    Ok(LinBilReport { lin_constant, bil_constant, lin_slope, bil_slope })
}

/// Log-log slope of `‖Lin‖` against `N₀` over a frequency sweep at fixed δ₁.
pub fn lin_frequency_slope(samples: &[LinBilSample]) -> Option<f64> {
    log_log_slope(&samples.iter().map(|s| (s.n0, s.lin)).collect::<Vec<_>>())
}
