use thiserror::Error;

use super::Snapshot;
use crate::scalar::Real;
use crate::spectral::FourierField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DuhamelError {
    #[error("need at least 5 equispaced snapshots starting at t = 0, got {0}")]
    TooFewSnapshots(usize),
    #[error("snapshot times must be equispaced from t = 0")]
    NotEquispaced,
}

/// Terms of `v(t) = e^{νtΔ}v₀ − 2·Lin(t) − Bil(t)` at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct DuhamelEntry<T: Real> {
    pub t: T,
    pub v: FourierField<T>,
    pub heat: FourierField<T>,
    pub lin: FourierField<T>,
    pub bil: FourierField<T>,
    /// H¹ norm of `v − heat + 2 lin + bil`.
    pub residual_h1: T,
    /// Richardson estimate of the H¹ quadrature error of `2 lin + bil`.
    pub quad_error: T,
    /// Set when the residual exceeds ten times the quadrature estimate.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DuhamelLedger<T: Real> {
    pub entries: Vec<DuhamelEntry<T>>,
}

impl<T: Real> DuhamelLedger<T> {
    pub fn at(&self, t: T) -> Option<&DuhamelEntry<T>> {
        self.entries.iter().find(|e| (e.t - t).abs() <= T::lit(1e-9) * (T::one() + t.abs()))
    }

    pub fn any_flagged(&self) -> bool {
        self.entries.iter().any(|e| e.flagged)
    }
}

/// Simpson weights on `0..=m` nodes (m even) with spacing `h`.
fn simpson_weights<T: Real>(m: usize, h: T) -> Vec<T> {
    let third = h / T::lit(3.0);
    (0..=m)
        .map(|j| {
            if j == 0 || j == m {
                third
            } else if j % 2 == 1 {
                third * T::lit(4.0)
            } else {
                third * T::lit(2.0)
            }
        })
        .collect()
}

/// Σ_j w_j e^{ν(t−s_j)Δ} f_j over the nodes `0..=m` of stride `stride`.
fn convolve<T: Real>(fs: &[FourierField<T>], i: usize, stride: usize, h: T, nu: T, alpha: T) -> FourierField<T> {
    let m = i / stride;
    let w = simpson_weights(m, h * T::from_usize_lossy(stride));
    let mut acc = FourierField::zeros(fs[0].grid());
    for (jj, wj) in w.iter().enumerate() {
        let j = jj * stride;
        let lag = h * T::from_usize_lossy(i - j) * nu;
        let term = fs[j].heat_propagate(lag, alpha).expect("nonnegative lag");
        acc.axpy(*wj, &term);
    }
    acc
}

/// Evaluates the Duhamel split of `v = u − w` around the reference solution
/// `w(t)` by composite Simpson quadrature over the stored snapshots.
///
/// Entries are produced at every fourth snapshot so each has a half-grid
/// Simpson companion for the error estimate.
pub fn duhamel_decompose<T: Real>(
    snapshots: &[Snapshot<T>],
    reference: impl Fn(T) -> FourierField<T>,
    nu: T,
    alpha: T,
) -> Result<DuhamelLedger<T>, DuhamelError> {
    let count = snapshots.len();
    if count < 5 {
        return Err(DuhamelError::TooFewSnapshots(count));
    }
    let h = snapshots[1].t - snapshots[0].t;
    let equispaced = snapshots[0].t.abs() <= T::lit(1e-12)
        && h > T::zero()
        && snapshots
            .iter()
            .enumerate()
            .all(|(i, s)| (s.t - h * T::from_usize_lossy(i)).abs() <= T::lit(1e-9) * (T::one() + s.t.abs()));
    if !equispaced {
        return Err(DuhamelError::NotEquispaced);
    }
    let vs: Vec<FourierField<T>> = snapshots.iter().map(|s| s.u.sub(&reference(s.t))).collect();
    let ws: Vec<FourierField<T>> = snapshots.iter().map(|s| reference(s.t)).collect();
    let lin_src: Vec<_> = vs.iter().zip(&ws).map(|(v, w)| v.div_sym_tensor(w).leray_project()).collect();
    let bil_src: Vec<_> = vs.iter().map(|v| v.div_sym_tensor(v).leray_project()).collect();

    let mut entries = Vec::new();
    for i in (0..count).step_by(4) {
        let t = snapshots[i].t;
        let heat = vs[0].heat_propagate(nu * t, alpha).expect("nonnegative time");
        let (lin, bil, quad_error) = if i == 0 {
            let z = FourierField::zeros(vs[0].grid());
            (z.clone(), z, T::zero())
        } else {
            let lin = convolve(&lin_src, i, 1, h, nu, alpha);
            let bil = convolve(&bil_src, i, 1, h, nu, alpha);
            let lin2 = convolve(&lin_src, i, 2, h, nu, alpha);
            let bil2 = convolve(&bil_src, i, 2, h, nu, alpha);
            let mut diff = lin.sub(&lin2).scaled(T::lit(2.0));
            diff.axpy(T::one(), &bil.sub(&bil2));
            (lin, bil, diff.sobolev_norm(1).value / T::lit(15.0))
        };
        let mut r = vs[i].sub(&heat);
        r.axpy(T::lit(2.0), &lin);
        r.axpy(T::one(), &bil);
        let residual_h1 = r.sobolev_norm(1).value;
        let flagged = residual_h1 > T::lit(10.0) * quad_error;
        entries.push(DuhamelEntry { t, v: vs[i].clone(), heat, lin, bil, residual_h1, quad_error, flagged });
    }
    Ok(DuhamelLedger { entries })
}
