use std::f64::consts::PI;

use super::MelnikovError;

/// One Fourier term `a cos(k·x) + b sin(k·x)` of a profile on T².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileMode {
    pub k: [i64; 2],
    pub cos: f64,
    pub sin: f64,
}

/// Band-limited height profile `h: T² → R`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ProfileH {
    modes: Vec<ProfileMode>,
}

impl ProfileH {
    pub fn new(modes: Vec<ProfileMode>) -> Self {
        ProfileH { modes }
    }

    pub fn zero() -> Self {
        ProfileH { modes: Vec::new() }
    }

    /// `cos(p x₁ − q x₂)`, constant along the resonant lines of `target`.
    pub fn resonant(target: ResonanceTarget) -> Self {
        ProfileH::new(vec![ProfileMode { k: [target.p as i64, -(target.q as i64)], cos: 1.0, sin: 0.0 }])
    }

    pub fn modes(&self) -> &[ProfileMode] {
        &self.modes
    }

    /// Largest |k_i| among the terms.
    pub fn band(&self) -> i64 {
        self.modes.iter().map(|m| m.k[0].abs().max(m.k[1].abs())).max().unwrap_or(0)
    }

    fn fold<const D: usize>(&self, x1: f64, x2: f64, f: impl Fn(&ProfileMode, f64, f64) -> [f64; D]) -> [f64; D] {
        let mut out = [0.0; D];
        for m in &self.modes {
            let (s, c) = (m.k[0] as f64 * x1 + m.k[1] as f64 * x2).sin_cos();
            let v = f(m, s, c);
            for i in 0..D {
                out[i] += v[i];
            }
        }
        out
    }

    pub fn value(&self, x1: f64, x2: f64) -> f64 {
        self.fold(x1, x2, |m, s, c| [m.cos * c + m.sin * s])[0]
    }

    pub fn gradient(&self, x1: f64, x2: f64) -> [f64; 2] {
        self.fold(x1, x2, |m, s, c| {
            let d = -m.cos * s + m.sin * c;
            [m.k[0] as f64 * d, m.k[1] as f64 * d]
        })
    }

    /// `[∂₁₁h, ∂₁₂h, ∂₂₂h]`.
    pub fn hessian(&self, x1: f64, x2: f64) -> [f64; 3] {
        self.fold(x1, x2, |m, s, c| {
            let d = -(m.cos * c + m.sin * s);
            let (k1, k2) = (m.k[0] as f64, m.k[1] as f64);
            [k1 * k1 * d, k1 * k2 * d, k2 * k2 * d]
        })
    }
}

/// Resonant torus `cot X₃ = p/q` with coprime `p, q` and `p/q ∈ (cot 3π/8, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResonanceTarget {
    pub p: u32,
    pub q: u32,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl ResonanceTarget {
    pub fn new(p: u32, q: u32) -> Result<Self, MelnikovError> {
        if p == 0 || q == 0 || gcd(p, q) != 1 {
            return Err(MelnikovError::NotCoprime { p, q });
        }
        let r = p as f64 / q as f64;
        let lower = 1.0 / (3.0 * PI / 8.0).tan();
        if !(r > lower && r < 1.0) {
            return Err(MelnikovError::OutsideWindow { p, q });
        }
        Ok(ResonanceTarget { p, q })
    }

    /// The shipped targets, (1,2) and (2,3).
    pub fn presets() -> [ResonanceTarget; 2] {
        [ResonanceTarget { p: 1, q: 2 }, ResonanceTarget { p: 2, q: 3 }]
    }

    pub fn ratio(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    /// Height `X₃ = arctan(q/p)` of the torus.
    pub fn height(&self) -> f64 {
        (self.q as f64).atan2(self.p as f64)
    }

    /// Period `2πq` of the unperturbed planar orbits.
    pub fn orbit_period(&self) -> f64 {
        2.0 * PI * self.q as f64
    }

    /// Period `2π/p` of the Melnikov function.
    pub fn xi_period(&self) -> f64 {
        2.0 * PI / self.p as f64
    }

    /// Phase `ξ` of the orbit through the section point `(0, x₂)`.
    pub fn xi_of_section(&self, x2: f64) -> f64 {
        (-(self.q as f64) / self.p as f64 * x2).rem_euclid(self.xi_period())
    }
}

/// Volume-preserving shift `Φ(x) = (x₁, x₂, x₃ + εh(x₁, x₂))`.
#[derive(Clone, Copy, Debug)]
pub struct Shift<'a> {
    pub eps: f64,
    pub h: &'a ProfileH,
}

impl<'a> Shift<'a> {
    pub fn new(eps: f64, h: &'a ProfileH) -> Self {
        Shift { eps, h }
    }

    pub fn apply(&self, x: [f64; 3]) -> [f64; 3] {
        [x[0], x[1], x[2] + self.eps * self.h.value(x[0], x[1])]
    }

    pub fn inverse(&self, y: [f64; 3]) -> [f64; 3] {
        [y[0], y[1], y[2] - self.eps * self.h.value(y[0], y[1])]
    }

    /// Row-major `DΦ(x)`.
    pub fn jacobian(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let g = self.h.gradient(x[0], x[1]);
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [self.eps * g[0], self.eps * g[1], 1.0]]
    }

    pub fn jacobian_det(&self, x: [f64; 3]) -> f64 {
        let j = self.jacobian(x);
        j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
            + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
    }

    /// `DΦ(x) v`, the vector `v` at `x` expressed in shifted coordinates.
    pub fn push_vector(&self, x: [f64; 3], v: [f64; 3]) -> [f64; 3] {
        let g = self.h.gradient(x[0], x[1]);
        [v[0], v[1], v[2] + self.eps * (g[0] * v[0] + g[1] * v[1])]
    }

    /// `(Φ*W)(x) = DΦ(x)⁻¹ W(Φ(x))`.
    pub fn pull_field(&self, w: impl Fn([f64; 3]) -> [f64; 3], x: [f64; 3]) -> [f64; 3] {
        let v = w(self.apply(x));
        let g = self.h.gradient(x[0], x[1]);
        [v[0], v[1], v[2] - self.eps * (g[0] * v[0] + g[1] * v[1])]
    }
}
