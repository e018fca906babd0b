//! Eigenfields of curl: explicit shear families and shell synthesis from
//! rational points on the sphere.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;
use crate::spectral::{czero, FieldFlags, FourierField, Grid, SpectralError, C};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeltramiError {
    #[error("frequency {n} exceeds the grid band {band}")]
    FrequencyOutOfBand { n: u32, band: i64 },
    #[error("frequency must be positive")]
    ZeroFrequency,
    #[error("amplitude breaks g(-ξ) = conj g(ξ) at {k:?}")]
    AsymmetricAmplitude { k: [i64; 3] },
    #[error("coefficient at {k:?} lies off the shell |k| = {n}")]
    OffShell { k: [i64; 3], n: u32 },
    #[error("mode {k:?} has amplitude not orthogonal to k")]
    NotTransverse { k: [i64; 3] },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// (2π)^{-3/2}, the amplitude giving unit L² norm to the shear family.
pub fn shear_amplitude() -> f64 {
    (2.0 * PI).powf(-1.5)
}

fn check_band(n: u32, grid: Grid) -> Result<(), BeltramiError> {
    if n == 0 {
        return Err(BeltramiError::ZeroFrequency);
    }
    if n as i64 > grid.band() {
        return Err(BeltramiError::FrequencyOutOfBand { n, band: grid.band() });
    }
    Ok(())
}

fn cz<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(T::lit(re), T::lit(im))
}

/// Unit-norm shear eigenfield along `axis` (0, 1 or 2).
///
/// Axis 2 is `(sin N x₃, cos N x₃, 0)`; the others are its cyclic
/// relabelings `(0, sin N x₁, cos N x₁)` and `(cos N x₂, 0, sin N x₂)`.
pub fn shear_beltrami_axis<T: Real>(n: u32, axis: usize, grid: Grid) -> Result<FourierField<T>, BeltramiError> {
    check_band(n, grid)?;
    let c = shear_amplitude();
    // sin θ ↦ -i/2 at +N, cos θ ↦ 1/2 at +N.
    let sin_slot = (axis + 1) % 3;
    let cos_slot = (axis + 2) % 3;
    let mut a = [czero::<T>(); 3];
    a[sin_slot] = cz(0.0, -0.5 * c);
    a[cos_slot] = cz(0.5 * c, 0.0);
    let mut k = [0i64; 3];
    k[axis] = n as i64;
    let mk = k.map(|x| -x);
    let modes = [(k, a), (mk, a.map(|z| z.conj()))];
    let mut f = FourierField::synthesize(grid, &modes, false)?;
    f.set_flags(FieldFlags { divergence_free: true, zero_mean: true });
    Ok(f)
}

/// The shear eigenfield `(2π)^{-3/2}(sin N x₃, cos N x₃, 0)`.
pub fn shear_beltrami<T: Real>(n: u32, grid: Grid) -> Result<FourierField<T>, BeltramiError> {
    shear_beltrami_axis(n, 2, grid)
}

/// Normalization of the three-shear family below.
pub fn reynolds_amplitude() -> f64 {
    (2.5f64).sqrt()
}

/// `√(5/2) (2 sin N x₃, sin N x₁ + 2 cos N x₃, cos N x₁)`, normalized so that
/// ‖(B·∇)B‖ / ‖ΔB‖ = 1/N.
pub fn reynolds_beltrami<T: Real>(n: u32, grid: Grid) -> Result<FourierField<T>, BeltramiError> {
    check_band(n, grid)?;
    let s = reynolds_amplitude() / shear_amplitude();
    let z: FourierField<T> = shear_beltrami_axis(n, 2, grid)?;
    let x: FourierField<T> = shear_beltrami_axis(n, 0, grid)?;
    let mut out = z.scaled(T::lit(2.0 * s));
    out.axpy(T::lit(s), &x);
    Ok(out)
}

/// Point ξ = k/N of the unit sphere with exact height N.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RationalSpherePoint {
    pub k: [i64; 3],
    pub n: u32,
}

impl RationalSpherePoint {
    pub fn xi(&self) -> [f64; 3] {
        let n = self.n as f64;
        [self.k[0] as f64 / n, self.k[1] as f64 / n, self.k[2] as f64 / n]
    }

    pub fn negated(&self) -> Self {
        RationalSpherePoint { k: self.k.map(|x| -x), n: self.n }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// All integer k with |k|² = N² and gcd(k₁, k₂, k₃, N) = 1, by a direct
/// scan of the shell.
pub fn rational_sphere_points(n: u32) -> Vec<RationalSpherePoint> {
    let nn = n as i64;
    let target = nn * nn;
    let mut out = Vec::new();
    for k1 in -nn..=nn {
        let r1 = target - k1 * k1;
        for k2 in -nn..=nn {
            let r2 = r1 - k2 * k2;
            if r2 < 0 {
                continue;
            }
            let k3 = isqrt(r2);
            if k3 * k3 != r2 {
                continue;
            }
            let candidates: &[i64] = if k3 == 0 { &[0] } else { &[-k3, k3] };
            for &c in candidates {
                if gcd(gcd(gcd(k1, k2), c), nn) == 1 {
                    out.push(RationalSpherePoint { k: [k1, k2, c], n });
                }
            }
        }
    }
    out.sort();
    out
}

fn isqrt(v: i64) -> i64 {
    if v <= 0 {
        return 0;
    }
    let mut r = (v as f64).sqrt() as i64;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    r
}

/// Number of caps in the fixed discrepancy family.
pub const CAP_COUNT: usize = 200;
/// Cap apertures in degrees, cycled by cap index.
pub const CAP_APERTURES_DEG: [f64; 3] = [10.0, 30.0, 60.0];

/// Centre and aperture (radians) of cap `i` of the fixed family.
pub fn cap(i: usize) -> ([f64; 3], f64) {
    let golden = PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - (2.0 * i as f64 + 1.0) / CAP_COUNT as f64;
    let r = (1.0 - z * z).sqrt();
    let phi = golden * i as f64;
    let centre = [r * phi.cos(), r * phi.sin(), z];
    (centre, CAP_APERTURES_DEG[i % 3].to_radians())
}

/// Largest deviation between the empirical cap fraction and the normalized
/// cap area (1 − cos θ)/2 over the fixed family of caps.
pub fn equidistribution_discrepancy(points: &[[f64; 3]]) -> f64 {
    assert!(!points.is_empty(), "discrepancy needs at least one point");
    let total = points.len() as f64;
    let mut worst: f64 = 0.0;
    for i in 0..CAP_COUNT {
        let (c, theta) = cap(i);
        let ct = theta.cos();
        let inside = points
            .iter()
            .filter(|p| {
                let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                (p[0] * c[0] + p[1] * c[1] + p[2] * c[2]) / norm >= ct
            })
            .count() as f64;
        worst = worst.max((inside / total - (1.0 - ct) / 2.0).abs());
    }
    worst
}

/// Vector amplitude on the sphere used to weight shell synthesis.
pub trait SphericalAmplitude<T: Real>: Sync {
    fn eval(&self, xi: [f64; 3]) -> [C<T>; 3];
}

impl<T: Real, F: Fn([f64; 3]) -> [C<T>; 3] + Sync> SphericalAmplitude<T> for F {
    fn eval(&self, xi: [f64; 3]) -> [C<T>; 3] {
        self(xi)
    }
}

/// Coefficient of the curl-eigenprojector on a vector `a` at wavevector `k`:
/// `(ik × (ik × a + N a)) / (2N²)`.
pub fn project_coefficient<T: Real>(k: [i64; 3], n: u32, a: [C<T>; 3]) -> [C<T>; 3] {
    let kk = k.map(T::from_i64_lossy);
    let nn = T::from_usize_lossy(n as usize);
    let ikx = |v: [C<T>; 3]| -> [C<T>; 3] {
        let c = [v[2] * kk[1] - v[1] * kk[2], v[0] * kk[2] - v[2] * kk[0], v[1] * kk[0] - v[0] * kk[1]];
        c.map(crate::spectral::times_i)
    };
    let inner = ikx(a);
    let s = [inner[0] + a[0] * nn, inner[1] + a[1] * nn, inner[2] + a[2] * nn];
    let outer = ikx(s);
    let d = T::lit(2.0) * nn * nn;
    outer.map(|z| z / d)
}

/// Beltrami-compatible amplitude built from a real vector field `a` on the
/// sphere with a(−ξ) = a(ξ): g(ξ) = P(ξ) a(ξ) with P the eigenprojector.
pub fn compatible_amplitude<T: Real>(a: impl Fn([f64; 3]) -> [f64; 3] + Sync) -> impl Fn([f64; 3]) -> [C<T>; 3] + Sync {
    move |xi: [f64; 3]| {
        let v = a(xi).map(|x| Complex::new(T::lit(x), T::zero()));
        projector_unit(xi, v)
    }
}

/// Eigenprojector at a real unit direction ξ: (J² + J)/2 with J = iξ×.
pub fn projector_unit<T: Real>(xi: [f64; 3], v: [C<T>; 3]) -> [C<T>; 3] {
    let x = xi.map(T::lit);
    let j = |v: [C<T>; 3]| -> [C<T>; 3] {
        let c = [v[2] * x[1] - v[1] * x[2], v[0] * x[2] - v[2] * x[0], v[1] * x[0] - v[0] * x[1]];
        c.map(crate::spectral::times_i)
    };
    let jv = j(v);
    let jjv = j(jv);
    let h = T::lit(0.5);
    [(jjv[0] + jv[0]) * h, (jjv[1] + jv[1]) * h, (jjv[2] + jv[2]) * h]
}

/// `(1/|X_N|) Σ_{ξ∈X_N} g(ξ) e^{i N ξ·x}`.
pub fn herglotz_sample<T: Real>(
    g: &dyn SphericalAmplitude<T>,
    n: u32,
    grid: Grid,
) -> Result<FourierField<T>, BeltramiError> {
    check_band(n, grid)?;
    let points = rational_sphere_points(n);
    if points.is_empty() {
        return Ok(FourierField::zeros(grid));
    }
    let w = T::one() / T::from_usize_lossy(points.len());
    let tol = T::lit(1e-12);
    let mut modes = Vec::with_capacity(points.len());
    for p in &points {
        let a = g.eval(p.xi());
        let b = g.eval(p.negated().xi());
        let scale = a.iter().fold(T::one(), |m, z| m.max(z.norm()));
        if (0..3).any(|c| (a[c] - b[c].conj()).norm() > tol * scale) {
            return Err(BeltramiError::AsymmetricAmplitude { k: p.k });
        }
        modes.push((p.k, a.map(|z| z * w)));
    }
    let mut f = FourierField::synthesize(grid, &modes, false)?;
    f.refresh_flags();
    Ok(f)
}

/// Applies the curl eigenprojector of frequency N to a field supported on
/// the shell |k| = N.
pub fn beltrami_project<T: Real>(field: &FourierField<T>, n: u32) -> Result<FourierField<T>, BeltramiError> {
    let grid = field.grid();
    check_band(n, grid)?;
    let n2 = (n as i64) * (n as i64);
    let mut out = FourierField::zeros(grid);
    for idx in 0..grid.spec_len() {
        let a = [field.component(0)[idx], field.component(1)[idx], field.component(2)[idx]];
        if a.iter().all(|z| z.re == T::zero() && z.im == T::zero()) {
            continue;
        }
        let k = grid.k_at(idx);
        if k[0] * k[0] + k[1] * k[1] + k[2] * k[2] != n2 {
            return Err(BeltramiError::OffShell { k, n });
        }
        let b = project_coefficient(k, n, a);
        for c in 0..3 {
            out.component_mut(c)[idx] = b[c];
        }
    }
    out.set_flags(FieldFlags { divergence_free: true, zero_mean: true });
    Ok(out)
}

/// Frequency plus transverse amplitudes on the shell |k| = N.
#[derive(Clone, Debug, PartialEq)]
pub struct BeltramiSpec<T: Real> {
    pub n: u32,
    pub modes: Vec<([i64; 3], [C<T>; 3])>,
}

impl<T: Real> BeltramiSpec<T> {
    /// Validates transversality and shell support.
    pub fn new(n: u32, modes: Vec<([i64; 3], [C<T>; 3])>) -> Result<Self, BeltramiError> {
        let n2 = (n as i64).pow(2);
        for (k, b) in &modes {
            if k[0] * k[0] + k[1] * k[1] + k[2] * k[2] != n2 {
                return Err(BeltramiError::OffShell { k: *k, n });
            }
            let kk = k.map(T::from_i64_lossy);
            let dot = b[0] * kk[0] + b[1] * kk[1] + b[2] * kk[2];
            let scale = b.iter().fold(T::zero(), |m, z| m.max(z.norm())) * T::from_usize_lossy(n as usize);
            if dot.norm() > T::lit(1e-12) * scale.max(T::one()) {
                return Err(BeltramiError::NotTransverse { k: *k });
            }
        }
        Ok(BeltramiSpec { n, modes })
    }

    /// Synthesizes the field and projects it onto the eigenspace.
    pub fn to_field(&self, grid: Grid) -> Result<FourierField<T>, BeltramiError> {
        let raw = FourierField::synthesize(grid, &self.modes, true)?;
        beltrami_project(&raw, self.n)
    }
}

/// Relative eigen-residual ‖curl W − N W‖ / ‖W‖.
pub fn eigen_residual<T: Real>(field: &FourierField<T>, n: u32) -> T {
    let c = field.curl();
    let r = c.sub(&field.scaled(T::from_usize_lossy(n as usize)));
    let norm = field.l2_norm();
    if norm == T::zero() {
        r.l2_norm()
    } else {
        r.l2_norm() / norm
    }
}

/// Example amplitudes shipped with the library.
pub mod amplitudes {
    /// Constant real vector, trivially conjugate-symmetric.
    pub fn constant(v: [f64; 3]) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
        move |_| v
    }

    /// Even quadratic profile a(ξ) = (ξ₂ξ₃, ξ₃ξ₁, ξ₁ξ₂) + e.
    pub fn quadratic(e: [f64; 3]) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
        move |x| [x[1] * x[2] + e[0], x[2] * x[0] + e[1], x[0] * x[1] + e[2]]
    }
}
