use std::collections::BTreeMap;
use std::f64::consts::PI;

use rustfft::num_complex::Complex;

use super::{Fft3, Grid, SpectralError};
use crate::scalar::Real;

pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

/// (2π)³, the volume of the torus.
pub fn torus_volume<T: Real>() -> T {
    T::lit((2.0 * PI).powi(3))
}

/// Structural flags carried by a vector field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FieldFlags {
    pub divergence_free: bool,
    pub zero_mean: bool,
}

/// Real scalar function on the torus in half-spectrum storage.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T: Real> {
    grid: Grid,
    coeffs: Vec<C<T>>,
}

/// Real vector field on the torus in half-spectrum storage.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierField<T: Real> {
    grid: Grid,
    comps: [Vec<C<T>>; 3],
    flags: FieldFlags,
}

/// Parseval Sobolev norm of order `m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevReport<T> {
    pub m: usize,
    pub value: T,
}

// Coefficient kernels shared by scalar and vector storage.

fn apply_real_multiplier<T: Real>(grid: Grid, c: &mut [C<T>], f: impl Fn([i64; 3]) -> T) {
    grid.for_each_mode(|idx, k| c[idx] = c[idx] * f(k));
}

fn weighted_sum<T: Real>(grid: Grid, f: impl Fn(usize, [i64; 3]) -> T) -> T {
    let mut acc = T::zero();
    let two = T::lit(2.0);
    grid.for_each_mode(|idx, k| {
        let v = f(idx, k);
        acc = acc + if grid.weight_k3(k[2]) == 1.0 { v } else { two * v };
    });
    acc
}

fn eval_scalar<T: Real>(grid: Grid, c: &[C<T>], x: [T; 3]) -> T {
    let mut acc = T::zero();
    for (idx, z) in c.iter().enumerate() {
        if z.re == T::zero() && z.im == T::zero() {
            continue;
        }
        let k = grid.k_at(idx);
        let phase = T::from_i64_lossy(k[0]) * x[0] + T::from_i64_lossy(k[1]) * x[1] + T::from_i64_lossy(k[2]) * x[2];
        let (s, co) = phase.sin_cos();
        let re = z.re * co - z.im * s;
        acc = acc + T::lit(grid.weight(idx)) * re;
    }
    acc
}

fn zero_nyquist<T: Real>(grid: Grid, c: &mut [C<T>]) {
    grid.for_each_mode(|idx, k| {
        if grid.k_on_nyquist(k) {
            c[idx] = czero();
        }
    });
}

/// Largest violation of `c(-k) = conj c(k)` inside the self-mirrored k₃ = 0 plane.
fn reality_defect<T: Real>(grid: Grid, c: &[C<T>]) -> T {
    let mut worst = T::zero();
    let n = grid.n();
    for i1 in 0..n {
        for i2 in 0..n {
            let k = grid.k_at(grid.flat(i1, i2, 0));
            if let Some((m, _)) = grid.slot([-k[0], -k[1], 0]) {
                let a = c[grid.flat(i1, i2, 0)];
                let d = (a - c[m].conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
    }
    worst
}

fn symmetrize_plane<T: Real>(grid: Grid, c: &mut [C<T>]) {
    let n = grid.n();
    let half = T::lit(0.5);
    for i1 in 0..n {
        for i2 in 0..n {
            let idx = grid.flat(i1, i2, 0);
            let k = grid.k_at(idx);
            if let Some((m, _)) = grid.slot([-k[0], -k[1], 0]) {
                if m < idx {
                    continue;
                }
                let a = c[idx];
                let b = c[m];
                let s = (a + b.conj()) * half;
                c[idx] = s;
                c[m] = s.conj();
            }
        }
    }
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField { grid, coeffs: vec![czero(); grid.spec_len()] }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coeffs(&self) -> &[C<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C<T>] {
        &mut self.coeffs
    }

    pub fn from_coeffs(grid: Grid, coeffs: Vec<C<T>>) -> Result<Self, SpectralError> {
        if coeffs.len() != grid.spec_len() {
            return Err(SpectralError::LengthMismatch { expected: grid.spec_len(), found: coeffs.len() });
        }
        Ok(ScalarField { grid, coeffs })
    }

    /// Coefficient at an arbitrary in-band wavevector.
    pub fn coeff(&self, k: [i64; 3]) -> Option<C<T>> {
        self.grid.slot(k).map(|(i, conj)| if conj { self.coeffs[i].conj() } else { self.coeffs[i] })
    }

    pub fn set_coeff(&mut self, k: [i64; 3], z: C<T>) -> Result<(), SpectralError> {
        let (i, conj) = self.grid.slot(k).ok_or(SpectralError::OutOfBand { k })?;
        self.coeffs[i] = if conj { z.conj() } else { z };
        if k[2] == 0 {
            if let Some((m, _)) = self.grid.slot([-k[0], -k[1], 0]) {
                self.coeffs[m] = if conj { z } else { z.conj() };
            }
        }
        Ok(())
    }

    pub fn from_physical(grid: Grid, values: &[T]) -> Self {
        let mut coeffs = Fft3::<T>::shared(grid).forward(values);
        zero_nyquist(grid, &mut coeffs);
        ScalarField { grid, coeffs }
    }

    /// Samples a closure on the grid and analyses it.
    pub fn sample(grid: Grid, f: impl Fn([f64; 3]) -> f64 + Sync) -> Self {
        let values = sample_grid(grid, |x| T::lit(f(x)));
        Self::from_physical(grid, &values)
    }

    pub fn to_physical(&self) -> Vec<T> {
        Fft3::<T>::shared(self.grid).inverse(&self.coeffs)
    }

    pub fn eval_at(&self, x: [T; 3]) -> T {
        eval_scalar(self.grid, &self.coeffs, x)
    }

    pub fn mean(&self) -> T {
        self.coeffs[0].re
    }

    pub fn gradient(&self) -> FourierField<T> {
        let g = self.grid;
        let mut comps = [self.coeffs.clone(), self.coeffs.clone(), self.coeffs.clone()];
        for (a, comp) in comps.iter_mut().enumerate() {
            g.for_each_mode(|idx, k| {
                let k = T::from_i64_lossy(k[a]);
                let z = comp[idx];
                comp[idx] = Complex::new(-z.im * k, z.re * k);
            });
        }
        FourierField { grid: g, comps, flags: FieldFlags { divergence_free: false, zero_mean: true } }
    }

    pub fn partial(&self, axis: usize) -> Self {
        let mut out = self.clone();
        let c = &mut out.coeffs;
        self.grid.for_each_mode(|idx, k| {
            let k = T::from_i64_lossy(k[axis]);
            let z = c[idx];
            c[idx] = Complex::new(-z.im * k, z.re * k);
        });
        out
    }

    pub fn laplacian(&self) -> Self {
        let mut out = self.clone();
        apply_real_multiplier(self.grid, &mut out.coeffs, |k| {
            -T::from_i64_lossy(k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
        });
        out
    }

    /// Zero-mean solution of Δφ = self; the mean of `self` must vanish.
    pub fn inverse_laplacian(&self, mean_tol: T) -> Result<Self, SpectralError> {
        let m = self.coeffs[0].norm();
        if m > mean_tol {
            return Err(SpectralError::NonzeroMean(m.as_f64()));
        }
        let mut out = self.clone();
        out.coeffs[0] = czero();
        apply_real_multiplier(self.grid, &mut out.coeffs, |k| {
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0 {
                T::zero()
            } else {
                -T::one() / T::from_i64_lossy(k2)
            }
        });
        Ok(out)
    }

    pub fn l2_norm(&self) -> T {
        let g = self.grid;
        (torus_volume::<T>() * weighted_sum(g, |i, _| self.coeffs[i].norm_sqr())).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a = *a - *b;
        }
        out
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        for a in out.coeffs.iter_mut() {
            *a = *a * s;
        }
        out
    }

    pub fn reality_defect(&self) -> T {
        reality_defect(self.grid, &self.coeffs)
    }
}

/// Evaluates `f` at every grid point in physical storage order.
pub fn sample_grid<V: Copy + Default + Send + Sync, F: Fn([f64; 3]) -> V + Sync>(grid: Grid, f: F) -> Vec<V> {
    use rayon::prelude::*;
    let n = grid.n();
    let mut out = vec![V::default(); grid.phys_len()];
    out.par_chunks_mut(n * n).enumerate().for_each(|(j1, slab)| {
        let x1 = grid.coord(j1);
        for j2 in 0..n {
            let x2 = grid.coord(j2);
            for j3 in 0..n {
                slab[j2 * n + j3] = f([x1, x2, grid.coord(j3)]);
            }
        }
    });
    out
}

impl<T: Real> FourierField<T> {
    pub fn zeros(grid: Grid) -> Self {
        let z = vec![czero(); grid.spec_len()];
        FourierField {
            grid,
            comps: [z.clone(), z.clone(), z],
            flags: FieldFlags { divergence_free: true, zero_mean: true },
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn flags(&self) -> FieldFlags {
        self.flags
    }

    pub fn set_flags(&mut self, flags: FieldFlags) {
        self.flags = flags;
    }

    pub fn component(&self, a: usize) -> &[C<T>] {
        &self.comps[a]
    }

    pub fn component_mut(&mut self, a: usize) -> &mut [C<T>] {
        &mut self.comps[a]
    }

    pub fn scalar(&self, a: usize) -> ScalarField<T> {
        ScalarField { grid: self.grid, coeffs: self.comps[a].clone() }
    }

    pub fn from_scalars(x: ScalarField<T>, y: ScalarField<T>, z: ScalarField<T>) -> Result<Self, SpectralError> {
        if x.grid != y.grid || y.grid != z.grid {
            return Err(SpectralError::GridMismatch);
        }
        let mut f = FourierField { grid: x.grid, comps: [x.coeffs, y.coeffs, z.coeffs], flags: FieldFlags::default() };
        f.refresh_flags();
        Ok(f)
    }

    pub fn from_components(grid: Grid, comps: [Vec<C<T>>; 3]) -> Result<Self, SpectralError> {
        for c in &comps {
            if c.len() != grid.spec_len() {
                return Err(SpectralError::LengthMismatch { expected: grid.spec_len(), found: c.len() });
            }
        }
        let mut f = FourierField { grid, comps, flags: FieldFlags::default() };
        f.refresh_flags();
        Ok(f)
    }

    pub(crate) fn from_raw(grid: Grid, comps: [Vec<C<T>>; 3], flags: FieldFlags) -> Self {
        FourierField { grid, comps, flags }
    }

    /// Recomputes both flags from the coefficients.
    pub fn refresh_flags(&mut self) {
        let zm = self.comps.iter().all(|c| c[0].re == T::zero() && c[0].im == T::zero());
        let df = self.divergence_residual() <= T::lit(1e-12);
        self.flags = FieldFlags { divergence_free: df, zero_mean: zm };
    }

    /// Builds a field from a list of (k, amplitude) pairs.
    ///
    /// Without `symmetrize` the list must be closed under `k ↦ -k` with
    /// conjugate amplitudes. With it, the real part of the trigonometric sum
    /// is taken, which leaves closed lists unchanged.
    pub fn synthesize(grid: Grid, modes: &[([i64; 3], [C<T>; 3])], symmetrize: bool) -> Result<Self, SpectralError> {
        let mut table: BTreeMap<[i64; 3], [C<T>; 3]> = BTreeMap::new();
        for (k, a) in modes {
            if !grid.fits(*k) {
                return Err(SpectralError::OutOfBand { k: *k });
            }
            let e = table.entry(*k).or_insert([czero(); 3]);
            for c in 0..3 {
                e[c] = e[c] + a[c];
            }
        }
        let zero = [czero::<T>(); 3];
        let mut resolved: BTreeMap<[i64; 3], [C<T>; 3]> = BTreeMap::new();
        for (k, a) in &table {
            let mk = [-k[0], -k[1], -k[2]];
            let b = table.get(&mk).copied().unwrap_or(zero);
            if symmetrize {
                let half = T::lit(0.5);
                let s = [(a[0] + b[0].conj()) * half, (a[1] + b[1].conj()) * half, (a[2] + b[2].conj()) * half];
                resolved.insert(*k, s);
                resolved.insert(mk, [s[0].conj(), s[1].conj(), s[2].conj()]);
            } else {
                let scale = a.iter().chain(b.iter()).fold(T::zero(), |m, z| m.max(z.norm()));
                let defect = (0..3).fold(T::zero(), |m, c| m.max((a[c] - b[c].conj()).norm()));
                if defect > T::lit(1e-12) * scale.max(T::one()) {
                    return Err(SpectralError::RealityViolation { k: *k });
                }
                resolved.insert(*k, *a);
            }
        }
        let mut f = Self::zeros(grid);
        for (k, a) in &resolved {
            if k[2] < 0 {
                continue;
            }
            let (idx, _) = grid.slot(*k).expect("checked band");
            for c in 0..3 {
                f.comps[c][idx] = a[c];
            }
        }
        f.refresh_flags();
        Ok(f)
    }

    /// Coefficient vector at any in-band wavevector.
    pub fn coeff(&self, k: [i64; 3]) -> Option<[C<T>; 3]> {
        let (i, conj) = self.grid.slot(k)?;
        let g = |c: usize| if conj { self.comps[c][i].conj() } else { self.comps[c][i] };
        Some([g(0), g(1), g(2)])
    }

    /// Nonzero half-spectrum modes with |coefficient| above `cutoff`, expanded
    /// to both members of each conjugate pair.
    pub fn active_modes(&self, cutoff: T) -> Vec<([i64; 3], [C<T>; 3])> {
        let mut out = Vec::new();
        for idx in 0..self.grid.spec_len() {
            let a = [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]];
            let mag = (a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()).sqrt();
            if mag <= cutoff || mag == T::zero() {
                continue;
            }
            let k = self.grid.k_at(idx);
            out.push((k, a));
            if k[2] > 0 {
                out.push(([-k[0], -k[1], -k[2]], [a[0].conj(), a[1].conj(), a[2].conj()]));
            }
        }
        out
    }

    pub fn from_physical(grid: Grid, values: [&[T]; 3]) -> Self {
        let plan = Fft3::<T>::shared(grid);
        let mut comps = [plan.forward(values[0]), plan.forward(values[1]), plan.forward(values[2])];
        for c in comps.iter_mut() {
            zero_nyquist(grid, c);
        }
        let mut f = FourierField { grid, comps, flags: FieldFlags::default() };
        f.refresh_flags();
        f
    }

    /// Samples a vector-valued closure on the grid and analyses it.
    pub fn sample(grid: Grid, f: impl Fn([f64; 3]) -> [f64; 3] + Sync) -> Self {
        let v: Vec<[f64; 3]> = sample_grid(grid, f);
        let split = |a: usize| v.iter().map(|p| T::lit(p[a])).collect::<Vec<T>>();
        let (x, y, z) = (split(0), split(1), split(2));
        Self::from_physical(grid, [&x, &y, &z])
    }

    pub fn to_physical(&self) -> [Vec<T>; 3] {
        let plan = Fft3::<T>::shared(self.grid);
        [plan.inverse(&self.comps[0]), plan.inverse(&self.comps[1]), plan.inverse(&self.comps[2])]
    }

    /// Direct trigonometric summation at a point.
    pub fn eval_at(&self, x: [T; 3]) -> [T; 3] {
        [
            eval_scalar(self.grid, &self.comps[0], x),
            eval_scalar(self.grid, &self.comps[1], x),
            eval_scalar(self.grid, &self.comps[2], x),
        ]
    }

    fn map_coeffs(&self, f: impl Fn([i64; 3], [C<T>; 3]) -> [C<T>; 3]) -> Self {
        let g = self.grid;
        let len = g.spec_len();
        let mut comps = [Vec::with_capacity(len), Vec::with_capacity(len), Vec::with_capacity(len)];
        g.for_each_mode(|idx, k| {
            let b = f(k, [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]);
            comps[0].push(b[0]);
            comps[1].push(b[1]);
            comps[2].push(b[2]);
        });
        FourierField { grid: g, comps, flags: self.flags }
    }

    /// Coefficient rule `i k × û(k)`.
    pub fn curl(&self) -> Self {
        let mut out = self.map_coeffs(|k, a| {
            let kk = k.map(T::from_i64_lossy);
            let cx = a[2] * kk[1] - a[1] * kk[2];
            let cy = a[0] * kk[2] - a[2] * kk[0];
            let cz = a[1] * kk[0] - a[0] * kk[1];
            [times_i(cx), times_i(cy), times_i(cz)]
        });
        out.flags = FieldFlags { divergence_free: true, zero_mean: true };
        out
    }

    pub fn divergence(&self) -> ScalarField<T> {
        let g = self.grid;
        let mut out = ScalarField::zeros(g);
        g.for_each_mode(|idx, k| {
            let k = k.map(T::from_i64_lossy);
            let s = self.comps[0][idx] * k[0] + self.comps[1][idx] * k[1] + self.comps[2][idx] * k[2];
            out.coeffs[idx] = times_i(s);
        });
        out
    }

    /// Projection onto divergence-free zero-mean fields.
    pub fn leray_project(&self) -> Self {
        let mut out = self.map_coeffs(|k, a| {
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0 {
                return [czero(); 3];
            }
            let kk = k.map(T::from_i64_lossy);
            let dot = (a[0] * kk[0] + a[1] * kk[1] + a[2] * kk[2]) / T::from_i64_lossy(k2);
            [a[0] - dot * kk[0], a[1] - dot * kk[1], a[2] - dot * kk[2]]
        });
        out.flags = FieldFlags { divergence_free: true, zero_mean: true };
        out
    }

    pub fn laplacian(&self) -> Self {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            apply_real_multiplier(self.grid, c, |k| -T::from_i64_lossy(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]));
        }
        out
    }

    /// Coefficient rule `û(k) ↦ e^{-s|k|^{2α}} û(k)`.
    pub fn heat_propagate(&self, s: T, alpha: T) -> Result<Self, SpectralError> {
        if !(s >= T::zero()) {
            return Err(SpectralError::NegativeTime(s.as_f64()));
        }
        if !(alpha > T::zero()) {
            return Err(SpectralError::BadExponent(alpha.as_f64()));
        }
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            apply_real_multiplier(self.grid, c, |k| heat_factor(k, s, alpha));
        }
        Ok(out)
    }

    /// Keeps only modes passing the two-thirds rule.
    pub fn dealiased(&self) -> Self {
        let mut out = self.clone();
        out.dealias_in_place();
        out
    }

    pub fn dealias_in_place(&mut self) {
        let g = self.grid;
        for c in self.comps.iter_mut() {
            g.for_each_mode(|idx, k| {
                if !g.dealias_keeps(k) {
                    c[idx] = czero();
                }
            });
        }
    }

    /// Σ_{j≤m} ∫|∇ʲu|², tensor convention, as its square root.
    pub fn sobolev_norm(&self, m: usize) -> SobolevReport<T> {
        let g = self.grid;
        let s = weighted_sum(g, |idx, k| {
            let k2 = T::from_i64_lossy(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
            let mut w = T::zero();
            let mut p = T::one();
            for _ in 0..=m {
                w = w + p;
                p = p * k2;
            }
            let a = self.comps[0][idx].norm_sqr() + self.comps[1][idx].norm_sqr() + self.comps[2][idx].norm_sqr();
            w * a
        });
        SobolevReport { m, value: (torus_volume::<T>() * s).sqrt() }
    }

    /// ∫|∇ʲu|² for a single order `j`.
    pub fn gradient_energy(&self, j: usize) -> T {
        let g = self.grid;
        torus_volume::<T>()
            * weighted_sum(g, |idx, k| {
                let k2 = T::from_i64_lossy(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
                let a = self.comps[0][idx].norm_sqr() + self.comps[1][idx].norm_sqr() + self.comps[2][idx].norm_sqr();
                k2.powi(j as i32) * a
            })
    }

    pub fn l2_norm(&self) -> T {
        self.sobolev_norm(0).value
    }

    /// L² pairing `∫ u·v`.
    pub fn inner(&self, other: &Self) -> T {
        let g = self.grid;
        torus_volume::<T>()
            * weighted_sum(g, |idx, _| {
                (0..3).fold(T::zero(), |acc, c| {
                    let a = self.comps[c][idx];
                    let b = other.comps[c][idx];
                    acc + a.re * b.re + a.im * b.im
                })
            })
    }

    /// max over k ≠ 0 of |k·û(k)| / max|û|.
    pub fn divergence_residual(&self) -> T {
        let g = self.grid;
        let mut worst = T::zero();
        let mut scale = T::zero();
        g.for_each_mode(|idx, k| {
            let k = k.map(T::from_i64_lossy);
            let a = [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]];
            let mag = (a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()).sqrt();
            scale = scale.max(mag);
            let d = (a[0] * k[0] + a[1] * k[1] + a[2] * k[2]).norm();
            worst = worst.max(d);
        });
        if scale == T::zero() {
            T::zero()
        } else {
            worst / scale
        }
    }

    pub fn mean(&self) -> [T; 3] {
        [self.comps[0][0].re, self.comps[1][0].re, self.comps[2][0].re]
    }

    pub fn reality_defect(&self) -> T {
        (0..3).fold(T::zero(), |m, c| m.max(reality_defect(self.grid, &self.comps[c])))
    }

    /// Projects the self-mirrored k₃ = 0 plane back onto real fields.
    pub fn symmetrize(&mut self) {
        for c in self.comps.iter_mut() {
            symmetrize_plane(self.grid, c);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(T::one(), other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-T::one(), other);
        out
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        out.scale_in_place(s);
        out
    }

    pub fn scale_in_place(&mut self, s: T) {
        for c in self.comps.iter_mut() {
            for z in c.iter_mut() {
                *z = *z * s;
            }
        }
    }

    /// self += a·x
    pub fn axpy(&mut self, a: T, x: &Self) {
        assert_eq!(self.grid, x.grid, "grid mismatch");
        for (c, xc) in self.comps.iter_mut().zip(&x.comps) {
            for (z, w) in c.iter_mut().zip(xc) {
                *z = *z + *w * a;
            }
        }
        self.flags = FieldFlags {
            divergence_free: self.flags.divergence_free && x.flags.divergence_free,
            zero_mean: self.flags.zero_mean && x.flags.zero_mean,
        };
    }

    /// Converts the coefficients to another scalar type.
    pub fn cast<U: Real>(&self) -> FourierField<U> {
        let conv =
            |c: &Vec<C<T>>| c.iter().map(|z| Complex::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64()))).collect();
        FourierField {
            grid: self.grid,
            comps: [conv(&self.comps[0]), conv(&self.comps[1]), conv(&self.comps[2])],
            flags: self.flags,
        }
    }

    /// Zero-pads or truncates the spectrum onto another grid.
    pub fn resample(&self, target: Grid) -> Self {
        let mut out = Self::zeros(target);
        let g = self.grid;
        for idx in 0..g.spec_len() {
            let k = g.k_at(idx);
            if g.on_nyquist(idx) || !target.fits(k) {
                continue;
            }
            let (t, _) = target.slot(k).expect("fits");
            for c in 0..3 {
                out.comps[c][t] = self.comps[c][idx];
            }
        }
        out.flags = self.flags;
        out
    }

    /// Largest pointwise speed on the grid refined by `oversample`.
    pub fn max_speed(&self, oversample: usize) -> T {
        let f = if oversample > 1 {
            self.resample(Grid::new(self.grid.n() * oversample).expect("power of two"))
        } else {
            self.clone()
        };
        let p = f.to_physical();
        let mut m = T::zero();
        for i in 0..p[0].len() {
            let s = (p[0][i] * p[0][i] + p[1][i] * p[1][i] + p[2][i] * p[2][i]).sqrt();
            m = m.max(s);
        }
        m
    }

    /// Pseudo-spectral `a × b`, dealiased.
    pub fn cross_dealiased(&self, other: &Self) -> Self {
        let a = self.dealiased().to_physical();
        let b = other.dealiased().to_physical();
        let len = a[0].len();
        let mut c = [vec![T::zero(); len], vec![T::zero(); len], vec![T::zero(); len]];
        for i in 0..len {
            c[0][i] = a[1][i] * b[2][i] - a[2][i] * b[1][i];
            c[1][i] = a[2][i] * b[0][i] - a[0][i] * b[2][i];
            c[2][i] = a[0][i] * b[1][i] - a[1][i] * b[0][i];
        }
        let mut out = Self::from_physical(self.grid, [&c[0], &c[1], &c[2]]);
        out.dealias_in_place();
        out
    }

    /// Pseudo-spectral `(a·∇)b`, dealiased.
    pub fn advect_dealiased(&self, b: &Self) -> Self {
        let a = self.dealiased().to_physical();
        let g = self.grid;
        let bd = b.dealiased();
        let mut out_c: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for comp in 0..3 {
            let s = bd.scalar(comp);
            let mut acc = vec![T::zero(); g.phys_len()];
            for axis in 0..3 {
                let d = s.partial(axis).to_physical();
                for i in 0..acc.len() {
                    acc[i] = acc[i] + a[axis][i] * d[i];
                }
            }
            out_c[comp] = acc;
        }
        let mut out = Self::from_physical(g, [&out_c[0], &out_c[1], &out_c[2]]);
        out.dealias_in_place();
        out
    }

    /// Pseudo-spectral `div(a ⊗ b)` with the symmetric product
    /// `(a⊗b)_ij = (a_i b_j + b_i a_j)/2`, dealiased.
    pub fn div_sym_tensor(&self, b: &Self) -> Self {
        let g = self.grid;
        let pa = self.dealiased().to_physical();
        let pb = b.dealiased().to_physical();
        let len = g.phys_len();
        let half = T::lit(0.5);
        let mut out = Self::zeros(g);
        for i in 0..3 {
            for j in 0..3 {
                let mut t = vec![T::zero(); len];
                for p in 0..len {
                    t[p] = half * (pa[i][p] * pb[j][p] + pb[i][p] * pa[j][p]);
                }
                let s = ScalarField::from_physical(g, &t).partial(j);
                for (z, w) in out.comps[i].iter_mut().zip(&s.coeffs) {
                    *z = *z + *w;
                }
            }
        }
        out.dealias_in_place();
        out.flags = FieldFlags { divergence_free: false, zero_mean: true };
        out
    }
}

#[inline]
pub(crate) fn times_i<T: Real>(z: C<T>) -> C<T> {
    Complex::new(-z.im, z.re)
}

#[inline]
pub(crate) fn heat_factor<T: Real>(k: [i64; 3], s: T, alpha: T) -> T {
    let k2 = T::from_i64_lossy(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
    if k2 == T::zero() {
        return T::one();
    }
    let p = if alpha == T::one() { k2 } else { k2.powf(alpha) };
    (-s * p).exp()
}
