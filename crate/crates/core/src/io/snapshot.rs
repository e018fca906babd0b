//! VXF1 layout, all values little-endian:
//!
//! | offset | content                                            |
//! |--------|----------------------------------------------------|
//! | 0      | magic `VXF1`                                       |
//! | 4      | grid size `n` (u64)                                |
//! | 12     | viscosity (f64)                                    |
//! | 20     | time (f64)                                         |
//! | 28     | dissipation exponent alpha (f64)                   |
//! | 36     | flags (u64): bit 0 divergence-free, bit 1 zero-mean |
//! | 44     | payload length in doubles (u64), always `6 n³`     |
//! | 52     | payload                                            |
//!
//! The payload lists every wavevector with `k_i ∈ {−n/2+1, …, n/2}` in
//! lexicographic order of `(k₁, k₂, k₃)`; each entry is
//! `re û₁, im û₁, re û₂, im û₂, re û₃, im û₃`. The `k₃ < 0` entries are the
//! conjugate mirror of the stored half and must match it exactly.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::write_atomic;
use crate::spectral::{FieldFlags, FourierField, Grid, C};

type Field = FourierField<f64>;

pub const MAGIC: [u8; 4] = *b"VXF1";
pub const HEADER_LEN: usize = 52;

const FLAG_DIVERGENCE_FREE: u64 = 1;
const FLAG_ZERO_MEAN: u64 = 2;

/// Scalar header values carried next to the coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotMeta {
    pub nu: f64,
    pub time: f64,
    pub alpha: f64,
}

impl Default for SnapshotMeta {
    fn default() -> Self {
        SnapshotMeta { nu: 0.0, time: 0.0, alpha: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoredSnapshot {
    pub field: Field,
    pub meta: SnapshotMeta,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnapshotError {
    #[error("bad magic {found:?}, expected VXF1")]
    MagicMismatch { found: Vec<u8> },
    #[error("truncated: {found} bytes present, {expected} required")]
    Truncated { expected: usize, found: usize },
    #[error("header declares {declared} doubles, grid {n} requires {expected}")]
    HeaderPayloadMismatch { n: u64, declared: u64, expected: u64 },
    #[error("{extra} bytes follow the declared payload")]
    TrailingBytes { extra: usize },
    #[error("grid size {0} is not supported")]
    BadGrid(u64),
    #[error("unknown flag bits {0:#x}")]
    BadFlags(u64),
    #[error("coefficient at {k:?} is not the conjugate of its mirror")]
    RealityViolation { k: [i64; 3] },
    #[error("{0}")]
    Io(String),
}

impl SnapshotError {
    /// Stable numeric code per failure kind.
    pub fn code(&self) -> u8 {
        match self {
            SnapshotError::MagicMismatch { .. } => 10,
            SnapshotError::Truncated { .. } => 11,
            SnapshotError::HeaderPayloadMismatch { .. } => 12,
            SnapshotError::TrailingBytes { .. } => 13,
            SnapshotError::BadGrid(_) => 14,
            SnapshotError::BadFlags(_) => 15,
            SnapshotError::RealityViolation { .. } => 16,
            SnapshotError::Io(_) => 17,
        }
    }
}

/// Full-spectrum FFT index of a signed wavenumber.
fn index(n: usize, k: i64) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Signed wavenumbers in payload order.
fn payload_wavenumbers(n: usize) -> impl Iterator<Item = i64> + Clone {
    let h = (n / 2) as i64;
    (-h + 1)..=h
}

pub fn encode_snapshot(field: &Field, meta: &SnapshotMeta) -> Vec<u8> {
    let g = field.grid();
    let n = g.n();
    let count = 6 * n * n * n;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * count);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&meta.nu.to_le_bytes());
    out.extend_from_slice(&meta.time.to_le_bytes());
    out.extend_from_slice(&meta.alpha.to_le_bytes());
    let flags = field.flags();
    let bits =
        if flags.divergence_free { FLAG_DIVERGENCE_FREE } else { 0 } | if flags.zero_mean { FLAG_ZERO_MEAN } else { 0 };
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(&(count as u64).to_le_bytes());
    let ks = payload_wavenumbers(n);
    for k1 in ks.clone() {
        for k2 in ks.clone() {
            for k3 in ks.clone() {
                let (idx, conj) = if k3 >= 0 {
                    (g.flat(index(n, k1), index(n, k2), k3 as usize), false)
                } else {
                    (g.flat(index(n, -k1), index(n, -k2), (-k3) as usize), true)
                };
                for c in 0..3 {
                    let z = field.component(c)[idx];
                    let z = if conj { z.conj() } else { z };
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
    }
    out
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("eight bytes"))
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("eight bytes"))
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<StoredSnapshot, SnapshotError> {
    if bytes.len() < MAGIC.len() || bytes[..4] != MAGIC {
        return Err(SnapshotError::MagicMismatch { found: bytes[..bytes.len().min(4)].to_vec() });
    }
    if bytes.len() < HEADER_LEN {
        return Err(SnapshotError::Truncated { expected: HEADER_LEN, found: bytes.len() });
    }
    let n64 = u64_at(bytes, 4);
    let meta = SnapshotMeta { nu: f64_at(bytes, 12), time: f64_at(bytes, 20), alpha: f64_at(bytes, 28) };
    let bits = u64_at(bytes, 36);
    let declared = u64_at(bytes, 44);
    if bits & !(FLAG_DIVERGENCE_FREE | FLAG_ZERO_MEAN) != 0 {
        return Err(SnapshotError::BadFlags(bits));
    }
    let grid = usize::try_from(n64)
        .ok()
        .filter(|&n| n <= 1 << 12)
        .and_then(|n| Grid::new(n).ok())
        .ok_or(SnapshotError::BadGrid(n64))?;
    let n = grid.n();
    let expected = 6 * (n as u64).pow(3);
    if declared != expected {
        return Err(SnapshotError::HeaderPayloadMismatch { n: n64, declared, expected });
    }
    let total = HEADER_LEN + 8 * expected as usize;
    if bytes.len() < total {
        return Err(SnapshotError::Truncated { expected: total, found: bytes.len() });
    }
    if bytes.len() > total {
        return Err(SnapshotError::TrailingBytes { extra: bytes.len() - total });
    }
    let mut comps: [Vec<C<f64>>; 3] = std::array::from_fn(|_| vec![C::new(0.0, 0.0); grid.spec_len()]);
    let mut mirrored = Vec::new();
    let mut at = HEADER_LEN;
    let ks = payload_wavenumbers(n);
    for k1 in ks.clone() {
        for k2 in ks.clone() {
            for k3 in ks.clone() {
                let mut entry = [C::new(0.0, 0.0); 3];
                for z in entry.iter_mut() {
                    *z = C::new(f64_at(bytes, at), f64_at(bytes, at + 8));
                    at += 16;
                }
                if k3 >= 0 {
                    let idx = grid.flat(index(n, k1), index(n, k2), k3 as usize);
                    for c in 0..3 {
                        comps[c][idx] = entry[c];
                    }
                } else {
                    mirrored.push(([k1, k2, k3], entry));
                }
            }
        }
    }
    for (k, entry) in mirrored {
        let idx = grid.flat(index(n, -k[0]), index(n, -k[1]), (-k[2]) as usize);
        if (0..3).any(|c| entry[c] != comps[c][idx].conj()) {
            return Err(SnapshotError::RealityViolation { k });
        }
    }
    let flags = FieldFlags { divergence_free: bits & FLAG_DIVERGENCE_FREE != 0, zero_mean: bits & FLAG_ZERO_MEAN != 0 };
    Ok(StoredSnapshot { field: Field::from_raw(grid, comps, flags), meta })
}

/// Atomic write of the encoded snapshot.
pub fn write_snapshot(field: &Field, meta: &SnapshotMeta, path: &Path) -> Result<(), SnapshotError> {
    write_atomic(path, &encode_snapshot(field, meta)).map_err(|e| SnapshotError::Io(format!("{}: {e}", path.display())))
}

pub fn read_snapshot(path: &Path) -> Result<StoredSnapshot, SnapshotError> {
    let bytes = fs::read(path).map_err(|e| SnapshotError::Io(format!("{}: {e}", path.display())))?;
    decode_snapshot(&bytes)
}
