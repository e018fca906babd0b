use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::Grid;
use crate::scalar::Real;

/// Three-dimensional real transform between the physical grid
/// (index `(j1*n + j2)*n + j3`) and the half spectrum.
pub struct Fft3<T: Real> {
    grid: Grid,
    r2c: Arc<dyn RealToComplex<T>>,
    c2r: Arc<dyn ComplexToReal<T>>,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

type PlanCache = Mutex<HashMap<(TypeId, usize), Arc<dyn Any + Send + Sync>>>;

fn cache() -> &'static PlanCache {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl<T: Real> Fft3<T> {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n();
        let mut rp = RealFftPlanner::<T>::new();
        let mut cp = FftPlanner::<T>::new();
        Fft3 {
            grid,
            r2c: rp.plan_fft_forward(n),
            c2r: rp.plan_fft_inverse(n),
            fwd: cp.plan_fft_forward(n),
            inv: cp.plan_fft_inverse(n),
        }
    }

    /// Process-wide plan for this scalar type and grid.
    pub fn shared(grid: Grid) -> Arc<Self> {
        let key = (TypeId::of::<T>(), grid.n());
        let mut map = cache().lock().expect("plan cache poisoned");
        let entry = map.entry(key).or_insert_with(|| Arc::new(Self::new(grid)) as Arc<dyn Any + Send + Sync>).clone();
        drop(map);
        entry.downcast::<Self>().expect("plan cache keyed by type")
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Analysis with scale 1/n³, so that `u(x) = Σ û(k) e^{ik·x}`.
    pub fn forward(&self, real: &[T]) -> Vec<Complex<T>> {
        self.forward_band(real, self.grid.n() / 2)
    }

    /// Synthesis; the input is not modified.
    pub fn inverse(&self, spec: &[Complex<T>]) -> Vec<T> {
        self.inverse_band(spec, self.grid.n() / 2)
    }

    /// Analysis keeping only `|k_i| ≤ kmax`; every other slot is zero.
    pub fn forward_band(&self, real: &[T], kmax: usize) -> Vec<Complex<T>> {
        let n = self.grid.n();
        let h = self.grid.half();
        assert_eq!(real.len(), n * n * n);
        let m3 = (kmax + 1).min(h);
        let zero = Complex::new(T::zero(), T::zero());
        let mut spec = vec![zero; n * n * h];
        let mut input = self.r2c.make_input_vec();
        let mut rscratch = self.r2c.make_scratch_vec();
        for row in 0..n * n {
            input.copy_from_slice(&real[row * n..(row + 1) * n]);
            self.r2c
                .process_with_scratch(&mut input, &mut spec[row * h..(row + 1) * h], &mut rscratch)
                .expect("r2c length");
        }
        let mut scratch = vec![zero; self.fwd.get_inplace_scratch_len()];
        let mut lines = vec![zero; n * n * m3];
        slow_axis_pass(&*self.fwd, &mut spec, &mut lines, &mut scratch, n, h, m3);
        let scale = T::one() / T::from_usize_lossy(n * n * n);
        for (i1, slab) in spec.chunks_mut(n * h).enumerate() {
            if in_band(i1, n, kmax) {
                middle_axis_pass(&*self.fwd, slab, &mut lines[..n * m3], &mut scratch, n, h, m3);
                for i2 in 0..n {
                    let row = &mut slab[i2 * h..(i2 + 1) * h];
                    if in_band(i2, n, kmax) {
                        row[..m3].iter_mut().for_each(|c| *c = *c * scale);
                        row[m3..].fill(zero);
                    } else {
                        row.fill(zero);
                    }
                }
            } else {
                slab.fill(zero);
            }
        }
        spec
    }

    /// Synthesis of a spectrum supported in `|k_i| ≤ kmax`; slots outside
    /// the band are ignored.
    pub fn inverse_band(&self, spec: &[Complex<T>], kmax: usize) -> Vec<T> {
        let n = self.grid.n();
        let h = self.grid.half();
        assert_eq!(spec.len(), n * n * h);
        let m3 = (kmax + 1).min(h);
        let zero = Complex::new(T::zero(), T::zero());
        let mut work = vec![zero; n * n * h];
        let mut scratch = vec![zero; self.inv.get_inplace_scratch_len()];
        let mut lines = vec![zero; n * n * m3];
        for i1 in 0..n {
            if !in_band(i1, n, kmax) {
                continue;
            }
            let src = &spec[i1 * n * h..(i1 + 1) * n * h];
            let slab = &mut work[i1 * n * h..(i1 + 1) * n * h];
            for i2 in 0..n {
                if in_band(i2, n, kmax) {
                    slab[i2 * h..i2 * h + m3].copy_from_slice(&src[i2 * h..i2 * h + m3]);
                }
            }
            middle_axis_pass(&*self.inv, slab, &mut lines[..n * m3], &mut scratch, n, h, m3);
        }
        slow_axis_pass(&*self.inv, &mut work, &mut lines, &mut scratch, n, h, m3);
        let mut real = vec![T::zero(); n * n * n];
        let mut cscratch = self.c2r.make_scratch_vec();
        let mut row = self.c2r.make_input_vec();
        for r in 0..n * n {
            row.copy_from_slice(&work[r * h..(r + 1) * h]);
            // c2r requires purely real DC and Nyquist bins of each row.
            row[0].im = T::zero();
            row[h - 1].im = T::zero();
            self.c2r.process_with_scratch(&mut row, &mut real[r * n..(r + 1) * n], &mut cscratch).expect("c2r length");
        }
        real
    }
}

fn in_band(i: usize, n: usize, kmax: usize) -> bool {
    i <= kmax || n - i <= kmax
}

/// Transform along the middle axis of one `n × h` slab, first `m3` columns.
fn middle_axis_pass<T: Real>(
    fft: &dyn Fft<T>,
    slab: &mut [Complex<T>],
    lines: &mut [Complex<T>],
    scratch: &mut [Complex<T>],
    n: usize,
    h: usize,
    m3: usize,
) {
    for i2 in 0..n {
        for i3 in 0..m3 {
            lines[i3 * n + i2] = slab[i2 * h + i3];
        }
    }
    fft.process_with_scratch(&mut lines[..n * m3], scratch);
    for i2 in 0..n {
        for i3 in 0..m3 {
            slab[i2 * h + i3] = lines[i3 * n + i2];
        }
    }
}

/// Transform along the slowest axis, first `m3` columns of every row.
fn slow_axis_pass<T: Real>(
    fft: &dyn Fft<T>,
    spec: &mut [Complex<T>],
    lines: &mut [Complex<T>],
    scratch: &mut [Complex<T>],
    n: usize,
    h: usize,
    m3: usize,
) {
    for i1 in 0..n {
        for i2 in 0..n {
            let row = &spec[(i1 * n + i2) * h..(i1 * n + i2) * h + m3];
            for (i3, z) in row.iter().enumerate() {
                lines[(i2 * m3 + i3) * n + i1] = *z;
            }
        }
    }
    fft.process_with_scratch(&mut lines[..n * n * m3], scratch);
    for i1 in 0..n {
        for i2 in 0..n {
            let row = &mut spec[(i1 * n + i2) * h..(i1 * n + i2) * h + m3];
            for (i3, z) in row.iter_mut().enumerate() {
                *z = lines[(i2 * m3 + i3) * n + i1];
            }
        }
    }
}
