//! Thin arithmetic context over `astro_float::BigFloat`.
//!
//! Positive quantities of the cascade are carried as natural logarithms:
//! the amplitudes and decay factors sit far below the double range, and the
//! largest frequency is itself beyond it.

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};

use super::ScenarioError;

/// Default mantissa length in bits.
pub const DEFAULT_PRECISION: usize = 512;
/// Shortest mantissa accepted by [`HighPrecision::new`].
pub const MIN_PRECISION: usize = 128;

const RM: RoundingMode = RoundingMode::ToEven;

/// Precision plus the constant cache needed by `ln` and `exp`.
pub struct HighPrecision {
    bits: usize,
    cc: Consts,
}

impl HighPrecision {
    pub fn new(bits: usize) -> Result<Self, ScenarioError> {
        if bits < MIN_PRECISION {
            return Err(ScenarioError::BadParameter { name: "precision", value: bits as f64 });
        }
        let cc = Consts::new().map_err(|e| ScenarioError::Precision(format!("{e:?}")))?;
        Ok(HighPrecision { bits, cc })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Exact conversion of a double.
    pub fn num(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, self.bits)
    }

    pub fn int(&self, n: u128) -> BigFloat {
        BigFloat::from_u128(n, self.bits)
    }

    pub fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.bits, RM)
    }

    pub fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, self.bits, RM)
    }

    pub fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.bits, RM)
    }

    pub fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.bits, RM)
    }

    pub fn scale(&self, a: &BigFloat, s: f64) -> BigFloat {
        self.mul(a, &self.num(s))
    }

    pub fn ln(&mut self, a: &BigFloat) -> BigFloat {
        a.ln(self.bits, RM, &mut self.cc)
    }

    pub fn exp(&mut self, a: &BigFloat) -> BigFloat {
        a.exp(self.bits, RM, &mut self.cc)
    }

    pub fn ln_f64(&mut self, x: f64) -> BigFloat {
        let b = self.num(x);
        self.ln(&b)
    }

    pub fn ln_int(&mut self, n: u128) -> BigFloat {
        let b = self.int(n);
        self.ln(&b)
    }

    /// `ln Σ exp(terms)`; terms more than the mantissa length below the
    /// largest contribute nothing at this precision and are skipped.
    pub fn log_sum(&mut self, terms: &[BigFloat]) -> BigFloat {
        let mut top = terms[0].clone();
        for t in &terms[1..] {
            if t > &top {
                top = t.clone();
            }
        }
        if top.is_inf() || top.is_nan() {
            return top;
        }
        let floor = self.num(-((self.bits + 8) as f64) * std::f64::consts::LN_2);
        let mut acc = self.num(0.0);
        for t in terms {
            let d = self.sub(t, &top);
            if d >= floor {
                let e = self.exp(&d);
                acc = self.add(&acc, &e);
            }
        }
        let l = self.ln(&acc);
        self.add(&top, &l)
    }

    /// Decimal rendering with every mantissa digit.
    pub fn format(&mut self, a: &BigFloat) -> String {
        a.format(Radix::Dec, RM, &mut self.cc).unwrap_or_else(|_| "nan".to_string())
    }

    pub fn parse(&mut self, s: &str) -> Option<BigFloat> {
        let b = BigFloat::parse(s.trim(), Radix::Dec, self.bits, RM, &mut self.cc);
        (!b.is_nan()).then_some(b)
    }
}

/// Nearest double, saturating to ±∞ and 0 outside the double range.
pub fn to_f64(a: &BigFloat) -> f64 {
    if a.is_nan() {
        return f64::NAN;
    }
    if a.is_inf_pos() {
        return f64::INFINITY;
    }
    if a.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    if a.is_zero() {
        return 0.0;
    }
    let Some((m, _, sign, e, _)) = a.as_raw_parts() else { return f64::NAN };
    // Value is 0.m × 2^e with the mantissa words stored low to high.
    let top = *m.last().unwrap_or(&0) as f64;
    let next = if m.len() > 1 { m[m.len() - 2] as f64 } else { 0.0 };
    let frac = (top + next / 2f64.powi(64)) / 2f64.powi(64);
    let half = e / 2;
    let v = frac * 2f64.powi(half) * 2f64.powi(e - half);
    if sign == Sign::Neg {
        -v
    } else {
        v
    }
}

/// `ln x / ln 10` as a double.
pub fn log10_of_ln(ln: &BigFloat) -> f64 {
    to_f64(ln) / std::f64::consts::LN_10
}
