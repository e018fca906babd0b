//! Pointwise evaluation of band-limited vector fields.

use std::f64::consts::PI;

use crate::scalar::Real;
use crate::spectral::{FourierField, Grid};

/// A smooth 2π-periodic vector field on R³.
pub trait VectorField: Sync {
    fn eval(&self, x: [f64; 3]) -> [f64; 3];
}

impl<F: Fn([f64; 3]) -> [f64; 3] + Sync> VectorField for F {
    fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        self(x)
    }
}

/// Direct trigonometric sum over the nonzero stored coefficients.
pub struct SparseField {
    modes: Vec<([f64; 3], [[f64; 2]; 3], f64)>,
}

/// Largest stored-mode count evaluated by direct summation.
pub const SPARSE_LIMIT: usize = 200;

impl SparseField {
    pub fn new<T: Real>(field: &FourierField<T>, scale: f64) -> Self {
        Self::with_cutoff(field, scale, 0.0)
    }

    /// Keeps only modes whose coefficient magnitude exceeds `cutoff` times
    /// the largest one.
    pub fn with_cutoff<T: Real>(field: &FourierField<T>, scale: f64, cutoff: f64) -> Self {
        let g = field.grid();
        let mag = |idx: usize| (0..3).map(|c| field.component(c)[idx].norm().as_f64().powi(2)).sum::<f64>().sqrt();
        let mut largest = 0.0f64;
        g.for_each_mode(|idx, _| largest = largest.max(mag(idx)));
        let floor = cutoff * largest;
        let mut modes = Vec::new();
        g.for_each_mode(|idx, k| {
            let a = [0, 1, 2].map(|c| field.component(c)[idx]);
            let m = mag(idx);
            if m == 0.0 || m <= floor {
                return;
            }
            let coeff = a.map(|z| [z.re.as_f64() * scale, z.im.as_f64() * scale]);
            modes.push((k.map(|v| v as f64), coeff, g.weight_k3(k[2])));
        });
        SparseField { modes }
    }

    /// Stored modes, counting each conjugate pair once off the `k₃ = 0` plane.
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

impl VectorField for SparseField {
    fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, c, w) in &self.modes {
            let (s, co) = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]).sin_cos();
            for i in 0..3 {
                out[i] += w * (c[i][0] * co - c[i][1] * s);
            }
        }
        out
    }
}

/// Tricubic Lagrange interpolation of grid samples.
pub struct GridField {
    n: usize,
    values: Vec<[f64; 3]>,
}

impl GridField {
    /// Samples `field * scale` on a grid refined by `oversample`.
    pub fn new<T: Real>(field: &FourierField<T>, scale: f64, oversample: usize) -> Self {
        let fine = Grid::new(field.grid().n() * oversample.max(1)).expect("refined grid is a power of two");
        let p = field.resample(fine).to_physical();
        let values = (0..fine.phys_len())
            .map(|i| [p[0][i].as_f64() * scale, p[1][i].as_f64() * scale, p[2][i].as_f64() * scale])
            .collect();
        GridField { n: fine.n(), values }
    }
}

fn lagrange4(t: f64) -> [f64; 4] {
    // Nodes at -1, 0, 1, 2.
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

impl VectorField for GridField {
    fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let n = self.n;
        let h = 2.0 * PI / n as f64;
        let mut base = [0i64; 3];
        let mut w = [[0.0; 4]; 3];
        for a in 0..3 {
            let s = x[a] / h;
            let f = s.floor();
            base[a] = f as i64;
            w[a] = lagrange4(s - f);
        }
        let wrap = |i: i64| i.rem_euclid(n as i64) as usize;
        let mut out = [0.0; 3];
        for (i, wi) in w[0].iter().enumerate() {
            let j1 = wrap(base[0] + i as i64 - 1);
            for (j, wj) in w[1].iter().enumerate() {
                let j2 = wrap(base[1] + j as i64 - 1);
                let wij = wi * wj;
                for (l, wl) in w[2].iter().enumerate() {
                    let j3 = wrap(base[2] + l as i64 - 1);
                    let v = &self.values[(j1 * n + j2) * n + j3];
                    let c = wij * wl;
                    out[0] += c * v[0];
                    out[1] += c * v[1];
                    out[2] += c * v[2];
                }
            }
        }
        out
    }
}

/// Evaluator of `scale · field`: direct summation for sparse spectra,
/// interpolation on a 4× refined grid otherwise.
pub fn evaluator<T: Real>(field: &FourierField<T>, scale: f64) -> Box<dyn VectorField> {
    let sparse = SparseField::new(field, scale);
    if sparse.len() <= SPARSE_LIMIT {
        Box::new(sparse)
    } else {
        Box::new(GridField::new(field, scale, 4))
    }
}

/// Evaluator of `scale · curl u`.
pub fn vorticity_evaluator<T: Real>(u: &FourierField<T>, scale: f64) -> Box<dyn VectorField> {
    evaluator(&u.curl(), scale)
}
