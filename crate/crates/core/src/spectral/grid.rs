use super::SpectralError;

/// Cubic periodic grid on [0, 2π)³ with `n` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self, SpectralError> {
        if n < 8 || !n.is_power_of_two() {
            return Err(SpectralError::GridSize(n));
        }
        Ok(Grid { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored wavenumbers along the last (halved) axis.
    #[inline]
    pub fn half(&self) -> usize {
        self.n / 2 + 1
    }

    /// Largest admissible |k_i|; the Nyquist plane is kept at zero.
    #[inline]
    pub fn band(&self) -> i64 {
        (self.n / 2) as i64 - 1
    }

    #[inline]
    pub fn spec_len(&self) -> usize {
        self.n * self.n * self.half()
    }

    #[inline]
    pub fn phys_len(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Signed wavenumber of FFT index `i`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    #[inline]
    fn fft_index(&self, k: i64) -> usize {
        if k >= 0 {
            k as usize
        } else {
            (k + self.n as i64) as usize
        }
    }

    pub fn fits(&self, k: [i64; 3]) -> bool {
        k.iter().all(|c| c.abs() <= self.band())
    }

    /// Storage slot of `k` in the half spectrum. The flag is true when the
    /// stored entry holds the conjugate of the coefficient at `k`.
    pub fn slot(&self, k: [i64; 3]) -> Option<(usize, bool)> {
        if !self.fits(k) {
            return None;
        }
        let (k, conj) = if k[2] < 0 { ([-k[0], -k[1], -k[2]], true) } else { (k, false) };
        let i1 = self.fft_index(k[0]);
        let i2 = self.fft_index(k[1]);
        Some(((i1 * self.n + i2) * self.half() + k[2] as usize, conj))
    }

    #[inline]
    pub fn flat(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i1 * self.n + i2) * self.half() + i3
    }

    /// Wavevector stored at flat slot `idx`.
    #[inline]
    pub fn k_at(&self, idx: usize) -> [i64; 3] {
        let h = self.half();
        let i3 = idx % h;
        let i2 = (idx / h) % self.n;
        let i1 = idx / (h * self.n);
        [self.wavenumber(i1), self.wavenumber(i2), i3 as i64]
    }

    /// Parseval multiplicity of slot `idx`: interior half-spectrum entries
    /// stand for themselves and their conjugate mirror.
    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        let i3 = idx % self.half();
        if i3 == 0 || i3 == self.n / 2 {
            1.0
        } else {
            2.0
        }
    }

    #[inline]
    pub fn on_nyquist(&self, idx: usize) -> bool {
        let h = self.half();
        let i3 = idx % h;
        let i2 = (idx / h) % self.n;
        let i1 = idx / (h * self.n);
        self.is_nyquist(i1) || self.is_nyquist(i2) || i3 == self.n / 2
    }

    /// Calls `f(slot, k)` for every stored slot in storage order.
    #[inline]
    pub fn for_each_mode(&self, mut f: impl FnMut(usize, [i64; 3])) {
        let n = self.n;
        let h = self.half();
        let mut idx = 0;
        for i1 in 0..n {
            let k1 = self.wavenumber(i1);
            for i2 in 0..n {
                let k2 = self.wavenumber(i2);
                for i3 in 0..h {
                    f(idx, [k1, k2, i3 as i64]);
                    idx += 1;
                }
            }
        }
    }

    /// Parseval multiplicity from the third wavenumber.
    #[inline]
    pub fn weight_k3(&self, k3: i64) -> f64 {
        if k3 == 0 || k3 == (self.n / 2) as i64 {
            1.0
        } else {
            2.0
        }
    }

    /// True when any component of `k` is a Nyquist wavenumber.
    #[inline]
    pub fn k_on_nyquist(&self, k: [i64; 3]) -> bool {
        let h = (self.n / 2) as i64;
        k[0] == h || k[1] == h || k[2] == h
    }

    /// Coordinate of grid index `j` along any axis.
    #[inline]
    pub fn coord(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.n as f64
    }

    /// Two-thirds rule: keeps modes with 3|k_i| < n.
    #[inline]
    pub fn dealias_keeps(&self, k: [i64; 3]) -> bool {
        let n = self.n as i64;
        k.iter().all(|c| 3 * c.abs() < n)
    }
}
