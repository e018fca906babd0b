//! Pseudo-spectral Navier–Stokes integration on the periodic box.
//!
//! The viscous term is integrated exactly through the factor
//! `e^{-ν|k|^{2α} t}`; the projected nonlinearity `P(u × curl u)` is formed
//! on the physical grid with two-thirds dealiasing.

mod duhamel;

pub use duhamel::{duhamel_decompose, DuhamelEntry, DuhamelError, DuhamelLedger};

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;

use thiserror::Error;

use crate::scalar::Real;
use crate::spectral::{times_i, Fft3, FieldFlags, FourierField, Grid};

/// CFL safety factor on the largest pointwise speed.
pub const CFL_SAFETY: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("time step {dt:e} exceeds the CFL bound; use dt <= {suggested:e}")]
    Cfl { dt: f64, suggested: f64 },
    #[error("non-finite coefficient after step at t = {t}")]
    NonFinite { t: f64 },
    #[error("viscosity must be positive, got {0}")]
    BadViscosity(f64),
    #[error("dissipation exponent must be positive, got {0}")]
    BadExponent(f64),
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("sample times must be increasing and not precede the initial time")]
    BadSamples,
    #[error("initial datum must be divergence-free and zero-mean")]
    BadDatum,
}

/// Velocity with its clock and dissipation parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState<T: Real> {
    pub u: FourierField<T>,
    pub t: T,
    pub nu: T,
    pub alpha: T,
}

/// Velocity sampled at a fixed time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot<T: Real> {
    pub t: T,
    pub u: FourierField<T>,
}

/// One row of the per-step diagnostic stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostic<T> {
    pub t: T,
    pub l2: T,
    pub h1: T,
    pub divergence: T,
    pub dt: T,
}

/// Integrating-factor RK4 stepper for fixed viscosity and exponent.
pub struct Solver<T: Real> {
    grid: Grid,
    nu: T,
    alpha: T,
    symbol: Vec<T>,
    kvec: Vec<[T; 3]>,
    keep: Vec<bool>,
    inv_k2: Vec<T>,
    plan: Arc<Fft3<T>>,
}

impl<T: Real> Solver<T> {
    pub fn new(grid: Grid, nu: T, alpha: T) -> Result<Self, SolverError> {
        if !(nu > T::zero()) {
            return Err(SolverError::BadViscosity(nu.as_f64()));
        }
        if !(alpha > T::zero()) {
            return Err(SolverError::BadExponent(alpha.as_f64()));
        }
        let symbol = (0..grid.spec_len())
            .map(|idx| {
                let k = grid.k_at(idx);
                let k2 = T::from_i64_lossy(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
                if k2 == T::zero() {
                    T::zero()
                } else {
                    nu * k2.powf(alpha)
                }
            })
            .collect();
        let mut kvec = Vec::with_capacity(grid.spec_len());
        let mut keep = Vec::with_capacity(grid.spec_len());
        let mut inv_k2 = Vec::with_capacity(grid.spec_len());
        grid.for_each_mode(|_, k| {
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            kvec.push(k.map(T::from_i64_lossy));
            keep.push(grid.dealias_keeps(k));
            inv_k2.push(if k2 == 0 { T::zero() } else { T::one() / T::from_i64_lossy(k2) });
        });
        Ok(Solver { grid, nu, alpha, symbol, kvec, keep, inv_k2, plan: Fft3::shared(grid) })
    }

    pub fn for_state(state: &SolverState<T>) -> Result<Self, SolverError> {
        Self::new(state.u.grid(), state.nu, state.alpha)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Largest admissible step for a given peak speed.
    pub fn cfl_limit(&self, max_speed: T) -> T {
        if max_speed <= T::zero() {
            return T::infinity();
        }
        T::lit(CFL_SAFETY) * T::lit(2.0 * PI) / T::from_usize_lossy(self.grid.n()) / max_speed
    }

    /// `P(u × curl u)` together with the peak grid speed of `u`.
    pub fn nonlinear(&self, u: &FourierField<T>) -> (FourierField<T>, T) {
        let len = self.grid.spec_len();
        let zero = Complex::new(T::zero(), T::zero());
        let mut ud = [vec![zero; len], vec![zero; len], vec![zero; len]];
        let mut w = [vec![zero; len], vec![zero; len], vec![zero; len]];
        let src = [u.component(0), u.component(1), u.component(2)];
        for idx in 0..len {
            if !self.keep[idx] {
                continue;
            }
            let k = self.kvec[idx];
            let a = [src[0][idx], src[1][idx], src[2][idx]];
            for c in 0..3 {
                ud[c][idx] = a[c];
            }
            w[0][idx] = times_i(a[2] * k[1] - a[1] * k[2]);
            w[1][idx] = times_i(a[0] * k[2] - a[2] * k[0]);
            w[2][idx] = times_i(a[1] * k[0] - a[0] * k[1]);
        }
        let kmax = (self.grid.n() - 1) / 3;
        let pu = ud.each_ref().map(|c| self.plan.inverse_band(c, kmax));
        let pw = w.each_ref().map(|c| self.plan.inverse_band(c, kmax));
        let n = pu[0].len();
        let mut cross = [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]];
        let mut vmax2 = T::zero();
        for i in 0..n {
            let (a0, a1, a2) = (pu[0][i], pu[1][i], pu[2][i]);
            let (b0, b1, b2) = (pw[0][i], pw[1][i], pw[2][i]);
            cross[0][i] = a1 * b2 - a2 * b1;
            cross[1][i] = a2 * b0 - a0 * b2;
            cross[2][i] = a0 * b1 - a1 * b0;
            vmax2 = vmax2.max(a0 * a0 + a1 * a1 + a2 * a2);
        }
        let mut out = cross.each_ref().map(|c| self.plan.forward_band(c, kmax));
        for idx in 0..len {
            if !self.keep[idx] || idx == 0 {
                for c in out.iter_mut() {
                    c[idx] = zero;
                }
                continue;
            }
            let k = self.kvec[idx];
            let dot = (out[0][idx] * k[0] + out[1][idx] * k[1] + out[2][idx] * k[2]) * self.inv_k2[idx];
            for c in 0..3 {
                out[c][idx] = out[c][idx] - dot * k[c];
            }
        }
        let flags = FieldFlags { divergence_free: true, zero_mean: true };
        (FourierField::from_raw(self.grid, out, flags), vmax2.sqrt())
    }

    fn factors(&self, dt: T) -> Vec<T> {
        self.symbol.iter().map(|s| (-*s * dt).exp()).collect()
    }

    fn propagate(f: &FourierField<T>, factors: &[T]) -> FourierField<T> {
        let mut out = f.clone();
        for c in 0..3 {
            for (z, e) in out.component_mut(c).iter_mut().zip(factors) {
                *z = *z * *e;
            }
        }
        out
    }

    /// One Lawson RK4 step of size `dt`.
    pub fn step(&self, state: &SolverState<T>, dt: T) -> Result<SolverState<T>, SolverError> {
        if !(dt > T::zero()) {
            return Err(SolverError::BadStep(dt.as_f64()));
        }
        let u = &state.u;
        let (a, vmax) = self.nonlinear(u);
        let limit = self.cfl_limit(vmax);
        if dt > limit {
            return Err(SolverError::Cfl { dt: dt.as_f64(), suggested: limit.as_f64() });
        }
        let half = dt * T::lit(0.5);
        let eh = self.factors(half);
        let ef = self.factors(dt);
        let mut u1 = u.clone();
        u1.axpy(half, &a);
        let u1 = Self::propagate(&u1, &eh);
        let (b, _) = self.nonlinear(&u1);

        let eu = Self::propagate(u, &eh);
        let mut u2 = eu.clone();
        u2.axpy(half, &b);
        let (c, _) = self.nonlinear(&u2);

        let mut u3 = Self::propagate(&eu, &eh);
        u3.axpy(dt, &Self::propagate(&c, &eh));
        let (d, _) = self.nonlinear(&u3);

        let mut mid = b.clone();
        mid.axpy(T::one(), &c);
        let mut incr = Self::propagate(&a, &ef);
        incr.axpy(T::lit(2.0), &Self::propagate(&mid, &eh));
        incr.axpy(T::one(), &d);
        let mut next = Self::propagate(u, &ef);
        next.axpy(dt / T::lit(6.0), &incr);

        let finite = (0..3).all(|c| next.component(c).iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        if !finite {
            return Err(SolverError::NonFinite { t: (state.t + dt).as_f64() });
        }
        next.set_flags(FieldFlags { divergence_free: true, zero_mean: true });
        Ok(SolverState { u: next, t: state.t + dt, nu: self.nu, alpha: self.alpha })
    }

    pub fn diagnostic(&self, state: &SolverState<T>, dt: T) -> StepDiagnostic<T> {
        StepDiagnostic {
            t: state.t,
            l2: state.u.l2_norm(),
            h1: state.u.sobolev_norm(1).value,
            divergence: state.u.divergence_residual(),
            dt,
        }
    }

    /// Advances `u0` from `t0` and lands exactly on every sample time.
    /// Each interval is split into equal steps no longer than `dt_max`; the
    /// count is doubled while the CFL bound rejects the step.
    pub fn run_with_diagnostics(
        &self,
        u0: &FourierField<T>,
        t0: T,
        samples: &[T],
        dt_max: T,
        mut on_step: impl FnMut(&StepDiagnostic<T>),
    ) -> Result<Vec<Snapshot<T>>, SolverError> {
        self.advance(u0, t0, samples, dt_max, Some(&mut on_step))
    }

    fn advance(
        &self,
        u0: &FourierField<T>,
        t0: T,
        samples: &[T],
        dt_max: T,
        mut on_step: Option<&mut dyn FnMut(&StepDiagnostic<T>)>,
    ) -> Result<Vec<Snapshot<T>>, SolverError> {
        if !(dt_max > T::zero()) {
            return Err(SolverError::BadStep(dt_max.as_f64()));
        }
        if samples.windows(2).any(|w| w[1] <= w[0]) || samples.first().map_or(false, |&s| s < t0) {
            return Err(SolverError::BadSamples);
        }
        let scale = u0.l2_norm().max(T::min_positive_value());
        if u0.divergence_residual() > T::lit(1e-10) || u0.mean().iter().any(|m| m.abs() > T::lit(1e-14) * scale) {
            return Err(SolverError::BadDatum);
        }
        let mut state = SolverState { u: u0.clone(), t: t0, nu: self.nu, alpha: self.alpha };
        let mut out = Vec::with_capacity(samples.len());
        for &target in samples {
            let span = target - state.t;
            if span > T::zero() {
                let mut steps = (span / dt_max - T::lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
                let start = state.clone();
                'attempt: loop {
                    let dt = span / T::from_usize_lossy(steps);
                    let mut s = start.clone();
                    for i in 0..steps {
                        match self.step(&s, dt) {
                            Ok(next) => s = next,
                            Err(SolverError::Cfl { .. }) => {
                                steps *= 2;
                                continue 'attempt;
                            }
                            Err(e) => return Err(e),
                        }
                        if i + 1 == steps {
                            s.t = target;
                        }
                        if let Some(f) = on_step.as_mut() {
                            f(&self.diagnostic(&s, dt));
                        }
                    }
                    state = s;
                    break;
                }
            }
            out.push(Snapshot { t: target, u: state.u.clone() });
        }
        Ok(out)
    }

    pub fn run(&self, u0: &FourierField<T>, samples: &[T], dt_max: T) -> Result<Vec<Snapshot<T>>, SolverError> {
        self.advance(u0, T::zero(), samples, dt_max, None)
    }
}

/// One step with a solver built from the state's parameters.
pub fn step<T: Real>(state: &SolverState<T>, dt: T) -> Result<SolverState<T>, SolverError> {
    Solver::for_state(state)?.step(state, dt)
}

/// Snapshots of the solution from `u0` at the requested times (starting at t = 0).
pub fn run<T: Real>(
    u0: &FourierField<T>,
    nu: T,
    alpha: T,
    samples: &[T],
    dt_max: T,
) -> Result<Vec<Snapshot<T>>, SolverError> {
    Solver::new(u0.grid(), nu, alpha)?.run(u0, samples, dt_max)
}
