use std::fmt::Write as _;

use astro_float::BigFloat;

use super::precision::{log10_of_ln, to_f64, HighPrecision, DEFAULT_PRECISION};
use super::ScenarioError;

/// One of the conditions a constant set must satisfy, each with the margin
/// factor standing in for "much smaller than".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    /// `N₁·margin ≤ N₀`, `N₂²·margin ≤ N₁`, `N_{k+1}·margin ≤ N_k` for k ≥ 2.
    FrequencyChain,
    /// `δ_{k+1} = δ_k ρ_k` with `ρ_k = e^{−νN_k²(T_k+T_{k+1})/2}`.
    AmplitudeRecursion,
    /// `δ₁ N₁^{r+1/2} · margin ≤ N₀^{−r}`.
    GlobalStability,
    /// `δ₁ N₁^{r−1/2} · margin ≤ 1`.
    InitialSmallness,
    /// `(δ_{k−1}/δ_k) e^{−ν(N_{k−1}²−N_k²)T_k} · margin ≤ N_{k−1}^{−r}` with `δ₀ = M`.
    EarlierDecayed,
    /// `(δ_{k+1}/δ_k) e^{ν(N_k²−N_{k+1}²)T_k} · margin ≤ N_{k+1}^{−r}`.
    LaterSuppressed,
    /// `δ_n⁻¹ e^{νN_n²T_n}(δ₁N₀⁻² + δ₁²N₀^{r+1}N₁^{r+2}) · margin ≤ 1`.
    DuhamelRemainder,
}

impl Condition {
    pub const ALL: [Condition; 7] = [
        Condition::FrequencyChain,
        Condition::AmplitudeRecursion,
        Condition::GlobalStability,
        Condition::InitialSmallness,
        Condition::EarlierDecayed,
        Condition::LaterSuppressed,
        Condition::DuhamelRemainder,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Condition::FrequencyChain => "frequency_chain",
            Condition::AmplitudeRecursion => "amplitude_recursion",
            Condition::GlobalStability => "global_stability",
            Condition::InitialSmallness => "initial_smallness",
            Condition::EarlierDecayed => "earlier_decayed",
            Condition::LaterSuppressed => "later_suppressed",
            Condition::DuhamelRemainder => "duhamel_remainder",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Condition::ALL.into_iter().find(|c| c.key() == key)
    }
}

/// A single verified instance of a condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub condition: Condition,
    /// Frequency or time index the instance refers to.
    pub index: usize,
    /// `log10(right side / (margin · left side))`; ±∞ when beyond doubles.
    pub log10_slack: f64,
    pub holds: bool,
}

/// Knobs of the constant recipe beyond the physical parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CascadeOptions {
    /// Mantissa bits of the verification arithmetic.
    pub precision: usize,
    /// The smallest frequency `N_n`.
    pub base_frequency: u64,
    /// Times `N₀` may be doubled while an `N₀`-dependent condition fails.
    pub max_doublings: usize,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        CascadeOptions { precision: DEFAULT_PRECISION, base_frequency: 2, max_doublings: 64 }
    }
}

/// Frequencies `N₀ … N_n`, amplitudes `δ₁ … δ_n` and the verification of
/// every condition at the stored values.
///
/// Frequencies and amplitudes are held as natural logarithms in the working
/// precision; frequencies small enough for `u64` also keep their exact value.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConstants {
    amplitude: f64,
    nu: f64,
    r: u32,
    margin: f64,
    c: Option<f64>,
    times: Vec<f64>,
    precision: usize,
    ln_freq: Vec<BigFloat>,
    freq: Vec<Option<u64>>,
    ln_delta: Vec<BigFloat>,
    ln_rho: Vec<BigFloat>,
    checks: Vec<Check>,
}

fn check_params(m: f64, nu: f64, r: u32, times: &[f64], margin: f64) -> Result<(), ScenarioError> {
    if !(m.is_finite() && m > 0.0) {
        return Err(ScenarioError::BadParameter { name: "M", value: m });
    }
    if !(nu.is_finite() && nu > 0.0) {
        return Err(ScenarioError::BadParameter { name: "nu", value: nu });
    }
    if r == 0 {
        return Err(ScenarioError::BadParameter { name: "r", value: 0.0 });
    }
    if !(margin.is_finite() && margin >= 1.0) {
        return Err(ScenarioError::BadParameter { name: "margin", value: margin });
    }
    if times.is_empty() {
        return Err(ScenarioError::NoTimes);
    }
    if !(times[0].is_finite() && times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0] && w[1].is_finite())) {
        return Err(ScenarioError::TimesNotIncreasing);
    }
    Ok(())
}

/// Chooses the cascade for `M`, `ν`, `r`, `T₁ < … < T_n` and the margin with
/// the default [`CascadeOptions`].
pub fn choose_constants(
    m: f64,
    nu: f64,
    r: u32,
    times: &[f64],
    margin: f64,
) -> Result<ScenarioConstants, ScenarioError> {
    choose_constants_with(m, nu, r, times, margin, &CascadeOptions::default())
}

/// The recipe: frequencies from `N_n` upward with the margin as ratio,
/// `N₀² ≥ 4·margin·N₁^{r−1} e^{νT_nN_n²} Π ρ_k⁻¹` (and `N₀ ≥ margin·N₁`),
/// `δ₁ = c N₀^{−r−1} N₁^{−r−2} e^{−νT_nN_n²} Π ρ_k` with `c = 1/(4·margin)`,
/// and `δ_{k+1} = δ_k ρ_k`. `N₀` is doubled while a condition depending on
/// it fails; any other failure is reported with the binding condition.
pub fn choose_constants_with(
    m: f64,
    nu: f64,
    r: u32,
    times: &[f64],
    margin: f64,
    opts: &CascadeOptions,
) -> Result<ScenarioConstants, ScenarioError> {
    check_params(m, nu, r, times, margin)?;
    if opts.base_frequency < 1 {
        return Err(ScenarioError::BadParameter { name: "base_frequency", value: 0.0 });
    }
    let n = times.len();
    let mut hp = HighPrecision::new(opts.precision)?;

    let mut upper = vec![0u64; n + 1];
    upper[n] = opts.base_frequency;
    for k in (1..n).rev() {
        let prev = upper[k + 1] as f64;
        let next = if k == 1 { margin * prev * prev } else { margin * prev };
        if next.ceil() >= u64::MAX as f64 {
            return Err(ScenarioError::Unrepresentable { what: format!("frequency N_{k} = {next:e}") });
        }
        upper[k] = next.ceil() as u64;
    }

    let mut c = ScenarioConstants {
        amplitude: m,
        nu,
        r,
        margin,
        c: Some(0.25 / margin),
        times: times.to_vec(),
        precision: opts.precision,
        ln_freq: vec![hp.num(0.0); n + 1],
        freq: vec![None; n + 1],
        ln_delta: Vec::new(),
        ln_rho: Vec::new(),
        checks: Vec::new(),
    };
    for k in 1..=n {
        c.set_frequency(&mut hp, k, upper[k]);
    }
    let ln_rho = c.rhos(&mut hp);
    let sum_ln_rho = ln_rho.iter().fold(hp.num(0.0), |a, b| hp.add(&a, b));
    let ln_e = c.exponent_at(&mut hp, n, n, 1.0);

    // ln N₀ from the dominant requirement, floored by the chain condition.
    let ln_n1 = c.ln_freq[1].clone();
    let ln_4m = hp.ln_f64(4.0 * margin);
    let a = hp.add(&ln_4m, &hp.scale(&ln_n1, r as f64 - 1.0));
    let a = hp.sub(&hp.add(&a, &ln_e), &sum_ln_rho);
    let from_remainder = hp.scale(&a, 0.5);
    let ln_m = hp.ln_f64(margin);
    let from_chain = hp.add(&ln_m, &ln_n1);
    let mut ln_n0 = if from_remainder > from_chain { from_remainder } else { from_chain };

    let ln_c = hp.ln_f64(0.25 / margin);
    let ln2 = hp.ln_f64(2.0);
    for _ in 0..=opts.max_doublings {
        c.set_n0_at_least(&mut hp, &ln_n0);
        let mut d1 = hp.sub(&ln_c, &hp.scale(&c.ln_freq[0], r as f64 + 1.0));
        d1 = hp.sub(&d1, &hp.scale(&ln_n1, r as f64 + 2.0));
        d1 = hp.add(&hp.sub(&d1, &ln_e), &sum_ln_rho);
        c.ln_delta = vec![d1];
        for k in 1..n {
            let next = hp.add(&c.ln_delta[k - 1], &ln_rho[k - 1]);
            c.ln_delta.push(next);
        }
        c.verify_with(&mut hp);
        let failing: Vec<&Check> = c.checks.iter().filter(|ch| !ch.holds).collect();
        if failing.is_empty() {
            return Ok(c);
        }
        let n0_bound = failing.iter().all(|ch| {
            matches!(ch.condition, Condition::GlobalStability | Condition::DuhamelRemainder)
                || (ch.condition == Condition::EarlierDecayed && ch.index == 1)
        });
        if !n0_bound {
            break;
        }
        ln_n0 = hp.add(&c.ln_freq[0], &ln2);
    }
    let b = c.binding().expect("a failing check exists").clone();
    Err(ScenarioError::Unattainable { condition: b.condition, index: b.index, log10_slack: b.log10_slack })
}

/// Explicit desk-scale set: integer frequencies `N₀ … N_n`, a chosen `δ₁ ≥ 0`
/// and `δ_{k+1} = δ_k ρ_k`. Conditions are verified and reported, not enforced.
pub fn desk_constants(
    m: f64,
    nu: f64,
    r: u32,
    times: &[f64],
    frequencies: &[u64],
    delta1: f64,
    margin: f64,
) -> Result<ScenarioConstants, ScenarioError> {
    check_params(m, nu, r, times, margin)?;
    let n = times.len();
    if frequencies.len() != n + 1 {
        return Err(ScenarioError::Count { what: "frequencies", expected: n + 1, found: frequencies.len() });
    }
    if let Some(k) = frequencies.iter().position(|&f| f == 0) {
        return Err(ScenarioError::BadParameter { name: "frequency", value: k as f64 });
    }
    if !(delta1.is_finite() && delta1 >= 0.0) {
        return Err(ScenarioError::BadParameter { name: "delta1", value: delta1 });
    }
    let mut hp = HighPrecision::new(DEFAULT_PRECISION)?;
    let mut c = ScenarioConstants {
        amplitude: m,
        nu,
        r,
        margin,
        c: None,
        times: times.to_vec(),
        precision: DEFAULT_PRECISION,
        ln_freq: vec![hp.num(0.0); n + 1],
        freq: vec![None; n + 1],
        ln_delta: Vec::new(),
        ln_rho: Vec::new(),
        checks: Vec::new(),
    };
    for (k, &f) in frequencies.iter().enumerate() {
        c.set_frequency(&mut hp, k, f);
    }
    let ln_rho = c.rhos(&mut hp);
    c.ln_delta.push(hp.ln_f64(delta1));
    for k in 1..n {
        let next = hp.add(&c.ln_delta[k - 1], &ln_rho[k - 1]);
        c.ln_delta.push(next);
    }
    c.verify_with(&mut hp);
    Ok(c)
}

fn gap_check(
    hp: &mut HighPrecision,
    condition: Condition,
    index: usize,
    lhs: &BigFloat,
    rhs: &BigFloat,
    ln_margin: &BigFloat,
) -> Check {
    let gap = hp.sub(&hp.sub(rhs, ln_margin), lhs);
    let zero = hp.num(0.0);
    Check { condition, index, log10_slack: log10_of_ln(&gap), holds: gap >= zero }
}

impl ScenarioConstants {
    fn set_frequency(&mut self, hp: &mut HighPrecision, k: usize, value: u64) {
        self.freq[k] = Some(value);
        self.ln_freq[k] = hp.ln_int(value as u128);
    }

    /// Smallest `N₀` at or above `e^{ln_n0}`; exact when it fits `u64`.
    fn set_n0_at_least(&mut self, hp: &mut HighPrecision, ln_n0: &BigFloat) {
        let approx = to_f64(ln_n0);
        if approx < 43.0 {
            let v = (approx.exp() * (1.0 + 1e-12)).ceil() as u64;
            self.set_frequency(hp, 0, v.max(1));
        } else {
            // Beyond u64 the value is kept as a logarithm; every condition is
            // monotone in N₀ in the favourable direction.
            self.freq[0] = None;
            self.ln_freq[0] = ln_n0.clone();
        }
    }

    /// `N_k²` in working precision.
    fn freq_sq(&self, hp: &mut HighPrecision, k: usize) -> BigFloat {
        match self.freq[k] {
            Some(v) => hp.int(v as u128 * v as u128),
            None => {
                let two = hp.scale(&self.ln_freq[k], 2.0);
                hp.exp(&two)
            }
        }
    }

    /// `s · ν N_k² T_t` (`t` counted from 1).
    fn exponent_at(&self, hp: &mut HighPrecision, k: usize, t: usize, s: f64) -> BigFloat {
        let sq = self.freq_sq(hp, k);
        hp.scale(&sq, s * self.nu * self.times[t - 1])
    }

    fn rhos(&self, hp: &mut HighPrecision) -> Vec<BigFloat> {
        (1..self.n())
            .map(|k| {
                let sq = self.freq_sq(hp, k);
                hp.scale(&sq, -self.nu * (self.times[k - 1] + self.times[k]) / 2.0)
            })
            .collect()
    }

    /// `ln δ_j` with `δ₀ = M`.
    fn ln_amp(&self, hp: &mut HighPrecision, j: usize) -> BigFloat {
        if j == 0 {
            hp.ln_f64(self.amplitude)
        } else {
            self.ln_delta[j - 1].clone()
        }
    }

    fn verify_with(&mut self, hp: &mut HighPrecision) {
        let n = self.n();
        let r = self.r as f64;
        let ln_m = hp.ln_f64(self.margin);
        let zero = hp.num(0.0);
        self.ln_rho = self.rhos(hp);
        let mut checks = Vec::new();

        // Frequency chain.
        for k in 0..n {
            let power = if k == 1 { 2 } else { 1 };
            let check = match (self.freq[k + 1], self.freq[k]) {
                (Some(lo), Some(hi)) => {
                    // Exact: a 128-bit product times a double fits the mantissa.
                    let lo = hp.int((lo as u128).pow(power));
                    let lhs = hp.mul(&lo, &hp.num(self.margin));
                    let rhs = hp.int(hi as u128);
                    let slack = (to_f64(&rhs) / to_f64(&lhs)).log10();
                    Check { condition: Condition::FrequencyChain, index: k, log10_slack: slack, holds: lhs <= rhs }
                }
                _ => {
                    let lhs = hp.scale(&self.ln_freq[k + 1], power as f64);
                    gap_check(hp, Condition::FrequencyChain, k, &lhs, &self.ln_freq[k], &ln_m)
                }
            };
            checks.push(check);
        }

        // Recursion, exact up to the working precision.
        let ulp = hp.num(2f64.powi(-(self.precision as i32 - 32)));
        for k in 1..n {
            let a = &self.ln_delta[k - 1];
            let b = &self.ln_delta[k];
            let both_zero = a.is_inf_neg() && b.is_inf_neg();
            let mismatch = hp.sub(&hp.sub(b, a), &self.ln_rho[k - 1]).abs();
            let tol = hp.mul(&ulp, &hp.add(&hp.num(1.0), &b.abs()));
            let holds = both_zero || mismatch <= tol;
            let slack = if both_zero || mismatch.is_zero() {
                f64::INFINITY
            } else {
                let (lt, lm) = (hp.ln(&tol), hp.ln(&mismatch));
                let l = hp.sub(&lt, &lm);
                log10_of_ln(&l)
            };
            checks.push(Check { condition: Condition::AmplitudeRecursion, index: k, log10_slack: slack, holds });
        }

        let d1 = self.ln_delta[0].clone();
        let (ln_n0, ln_n1) = (self.ln_freq[0].clone(), self.ln_freq[1].clone());

        let lhs = hp.add(&d1, &hp.scale(&ln_n1, r + 0.5));
        let rhs = hp.scale(&ln_n0, -r);
        checks.push(gap_check(hp, Condition::GlobalStability, 1, &lhs, &rhs, &ln_m));

        let lhs = hp.add(&d1, &hp.scale(&ln_n1, r - 0.5));
        checks.push(gap_check(hp, Condition::InitialSmallness, 1, &lhs, &zero, &ln_m));

        for k in 1..=n {
            let prev = self.ln_amp(hp, k - 1);
            let ratio = hp.sub(&prev, &self.ln_delta[k - 1]);
            let hi = self.exponent_at(hp, k - 1, k, 1.0);
            let lo = self.exponent_at(hp, k, k, 1.0);
            let lhs = hp.sub(&ratio, &hp.sub(&hi, &lo));
            let rhs = hp.scale(&self.ln_freq[k - 1], -r);
            checks.push(gap_check(hp, Condition::EarlierDecayed, k, &lhs, &rhs, &ln_m));
        }

        for k in 1..n {
            let ratio = hp.sub(&self.ln_delta[k], &self.ln_delta[k - 1]);
            let hi = self.exponent_at(hp, k, k, 1.0);
            let lo = self.exponent_at(hp, k + 1, k, 1.0);
            let lhs = hp.add(&ratio, &hp.sub(&hi, &lo));
            let rhs = hp.scale(&self.ln_freq[k + 1], -r);
            checks.push(gap_check(hp, Condition::LaterSuppressed, k, &lhs, &rhs, &ln_m));
        }

        let first = hp.sub(&d1, &hp.scale(&ln_n0, 2.0));
        let second = hp.add(&hp.scale(&d1, 2.0), &hp.scale(&ln_n0, r + 1.0));
        let second = hp.add(&second, &hp.scale(&ln_n1, r + 2.0));
        let sum = if d1.is_inf_neg() { d1.clone() } else { hp.log_sum(&[first, second]) };
        let growth = self.exponent_at(hp, n, n, 1.0);
        let lhs = hp.add(&hp.sub(&growth, &self.ln_delta[n - 1]), &sum);
        checks.push(gap_check(hp, Condition::DuhamelRemainder, n, &lhs, &zero, &ln_m));

        self.checks = checks;
    }

    /// Re-runs every check at the stored values.
    pub fn verify(&mut self) -> Result<(), ScenarioError> {
        let mut hp = HighPrecision::new(self.precision)?;
        self.verify_with(&mut hp);
        Ok(())
    }

    /// Copy with `δ_k` multiplied by `factor`, re-verified.
    pub fn with_delta_scaled(&self, k: usize, factor: f64) -> Result<Self, ScenarioError> {
        if k == 0 || k > self.n() {
            return Err(ScenarioError::Count { what: "amplitude index", expected: self.n(), found: k });
        }
        let mut hp = HighPrecision::new(self.precision)?;
        let mut out = self.clone();
        let l = hp.ln_f64(factor);
        out.ln_delta[k - 1] = hp.add(&out.ln_delta[k - 1], &l);
        out.c = None;
        out.verify_with(&mut hp);
        Ok(out)
    }

    /// Copy with `N_k` multiplied by `factor`, re-verified; `ρ` follows.
    pub fn with_frequency_scaled(&self, k: usize, factor: f64) -> Result<Self, ScenarioError> {
        if k > self.n() {
            return Err(ScenarioError::Count { what: "frequency index", expected: self.n(), found: k });
        }
        let mut hp = HighPrecision::new(self.precision)?;
        let mut out = self.clone();
        let exact = out.freq[k].map(|v| v as f64 * factor).filter(|v| v.fract() == 0.0 && *v < u64::MAX as f64);
        match exact {
            Some(v) => out.set_frequency(&mut hp, k, v as u64),
            None => {
                let l = hp.ln_f64(factor);
                out.ln_freq[k] = hp.add(&out.ln_freq[k], &l);
                out.freq[k] = None;
            }
        }
        out.c = None;
        out.verify_with(&mut hp);
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Recipe constant `c`, absent for explicit or tampered sets.
    pub fn recipe_constant(&self) -> Option<f64> {
        self.c
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `T_k` with `T₀ = 0`.
    pub fn time(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.times[k - 1]
        }
    }

    pub fn precision(&self) -> usize {
        self.precision
    }

    /// Exact `N_k` when it fits a `u64`.
    pub fn frequency(&self, k: usize) -> Option<u64> {
        self.freq[k]
    }

    pub fn ln_frequency(&self, k: usize) -> &BigFloat {
        &self.ln_freq[k]
    }

    pub fn log10_frequency(&self, k: usize) -> f64 {
        log10_of_ln(&self.ln_freq[k])
    }

    /// `ln δ_k` for `k ≥ 1`.
    pub fn ln_delta(&self, k: usize) -> &BigFloat {
        &self.ln_delta[k - 1]
    }

    pub fn log10_delta(&self, k: usize) -> f64 {
        log10_of_ln(&self.ln_delta[k - 1])
    }

    /// `δ_k` as a double; zero when it underflows.
    pub fn delta(&self, k: usize) -> f64 {
        to_f64(&self.ln_delta[k - 1]).exp()
    }

    /// `ln ρ_k` for `1 ≤ k ≤ n − 1`.
    pub fn ln_rho(&self, k: usize) -> &BigFloat {
        &self.ln_rho[k - 1]
    }

    pub fn checks(&self) -> &[Check] {
        &self.checks
    }

    /// Whether every instance of `condition` holds.
    pub fn flag(&self, condition: Condition) -> bool {
        self.checks.iter().filter(|c| c.condition == condition).all(|c| c.holds)
    }

    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    /// The check with the least slack, failing ones first.
    pub fn binding(&self) -> Option<&Check> {
        self.checks.iter().min_by(|a, b| {
            (a.holds, a.log10_slack).partial_cmp(&(b.holds, b.log10_slack)).unwrap_or(std::cmp::Ordering::Equal)
        })
    }

    /// `Π_{j<k} ρ_j` and `δ_k / δ₁`, both as natural logarithms.
    pub fn rho_product_and_ratio(&self, k: usize) -> Result<(BigFloat, BigFloat), ScenarioError> {
        let hp = HighPrecision::new(self.precision)?;
        let prod = self.ln_rho[..k - 1].iter().fold(hp.num(0.0), |a, b| hp.add(&a, b));
        let ratio = hp.sub(&self.ln_delta[k - 1], &self.ln_delta[0]);
        Ok((prod, ratio))
    }

    /// `key = value` document, one entry per line.
    ///
    /// Authoritative keys: `precision`, `M`, `nu`, `r`, `margin`, `c`, `n`,
    /// `T.k`, `ln_N.k`, `ln_delta.k`. Exact frequencies appear as `N.k`;
    /// `log10_*`, `ln_rho.k`, `check.*`, `slack.*` and `all_hold` are
    /// derived and recomputed on reading.
    pub fn to_text(&self) -> String {
        let mut hp = HighPrecision::new(self.precision).expect("precision validated at construction");
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("format", FORMAT.to_string());
        put("precision", self.precision.to_string());
        put("M", real(self.amplitude));
        put("nu", real(self.nu));
        put("r", self.r.to_string());
        put("margin", real(self.margin));
        put("c", self.c.map_or("none".to_string(), real));
        put("n", self.n().to_string());
        for (k, t) in self.times.iter().enumerate() {
            put(&format!("T.{}", k + 1), real(*t));
        }
        for k in 0..=self.n() {
            if let Some(v) = self.freq[k] {
                put(&format!("N.{k}"), v.to_string());
            }
            put(&format!("ln_N.{k}"), hp.format(&self.ln_freq[k]));
            put(&format!("log10_N.{k}"), real(self.log10_frequency(k)));
        }
        for k in 1..=self.n() {
            put(&format!("ln_delta.{k}"), hp.format(&self.ln_delta[k - 1]));
            put(&format!("log10_delta.{k}"), real(self.log10_delta(k)));
        }
        for k in 1..self.n() {
            put(&format!("ln_rho.{k}"), hp.format(&self.ln_rho[k - 1]));
        }
        for c in &self.checks {
            put(&format!("check.{}.{}", c.condition.key(), c.index), c.holds.to_string());
            put(&format!("slack.{}.{}", c.condition.key(), c.index), real(c.log10_slack));
        }
        put("all_hold", self.all_hold().to_string());
        s
    }

    /// Parses [`ScenarioConstants::to_text`] output and re-verifies.
    pub fn from_text(text: &str) -> Result<Self, ScenarioError> {
        let mut entries = std::collections::BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ScenarioError::Parse { line: i + 1, message: "expected `key = value`".into() });
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !known_key(&k) {
                return Err(ScenarioError::Parse { line: i + 1, message: format!("unknown key `{k}`") });
            }
            if entries.insert(k.clone(), (i + 1, v)).is_some() {
                return Err(ScenarioError::Parse { line: i + 1, message: format!("duplicate key `{k}`") });
            }
        }
        let get = |k: &str| {
            entries.get(k).ok_or_else(|| ScenarioError::Parse { line: 0, message: format!("missing key `{k}`") })
        };
        let num = |k: &str| -> Result<f64, ScenarioError> {
            let (line, v) = get(k)?;
            v.parse::<f64>()
                .map_err(|_| ScenarioError::Parse { line: *line, message: format!("`{k}` is not a number") })
        };
        let int = |k: &str| -> Result<u64, ScenarioError> {
            let (line, v) = get(k)?;
            v.parse::<u64>()
                .map_err(|_| ScenarioError::Parse { line: *line, message: format!("`{k}` is not an integer") })
        };
        if get("format")?.1 != FORMAT {
            return Err(ScenarioError::Parse { line: get("format")?.0, message: "unsupported format".into() });
        }
        let precision = int("precision")? as usize;
        let mut hp = HighPrecision::new(precision)?;
        let n = int("n")? as usize;
        let times: Vec<f64> = (1..=n).map(|k| num(&format!("T.{k}"))).collect::<Result<_, _>>()?;
        let (m, nu, margin) = (num("M")?, num("nu")?, num("margin")?);
        let r = int("r")? as u32;
        check_params(m, nu, r, &times, margin)?;
        let c = match get("c")?.1.as_str() {
            "none" => None,
            _ => Some(num("c")?),
        };
        let mut big = |k: &str| -> Result<BigFloat, ScenarioError> {
            let (line, v) = get(k)?;
            hp.parse(v).ok_or_else(|| ScenarioError::Parse { line: *line, message: format!("`{k}` is not a number") })
        };
        let mut ln_freq = Vec::new();
        for k in 0..=n {
            ln_freq.push(big(&format!("ln_N.{k}"))?);
        }
        let ln_delta: Vec<BigFloat> = (1..=n).map(|k| big(&format!("ln_delta.{k}"))).collect::<Result<_, _>>()?;
        let mut out = ScenarioConstants {
            amplitude: m,
            nu,
            r,
            margin,
            c,
            times,
            precision,
            ln_freq,
            freq: vec![None; n + 1],
            ln_delta,
            ln_rho: Vec::new(),
            checks: Vec::new(),
        };
        for k in 0..=n {
            if entries.contains_key(&format!("N.{k}")) {
                let v = int(&format!("N.{k}"))?;
                out.set_frequency(&mut hp, k, v);
            }
        }
        out.verify_with(&mut hp);
        Ok(out)
    }
}

/// Shortest round-trip rendering, scientific outside `[1e-4, 1e15)`.
pub(crate) fn real(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// Header value of the constants document.
pub const FORMAT: &str = "vortexlab-constants-1";

fn known_key(k: &str) -> bool {
    const PLAIN: [&str; 9] = ["format", "precision", "M", "nu", "r", "margin", "c", "n", "all_hold"];
    if PLAIN.contains(&k) {
        return true;
    }
    let Some((head, idx)) = k.rsplit_once('.') else { return false };
    if idx.parse::<usize>().is_err() {
        return false;
    }
    match head.split_once('.') {
        Some(("check" | "slack", cond)) => Condition::from_key(cond).is_some(),
        None => matches!(head, "T" | "N" | "ln_N" | "log10_N" | "ln_delta" | "log10_delta" | "ln_rho"),
        _ => false,
    }
}
