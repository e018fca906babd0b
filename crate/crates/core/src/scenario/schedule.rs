use super::constants::ScenarioConstants;
use super::precision::{log10_of_ln, HighPrecision};
use super::ScenarioError;
use crate::spectral::FourierField;

type Field = FourierField<f64>;

/// Rescaled expansion at one time `T_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleRow {
    pub k: usize,
    pub time: f64,
    /// `log10` of the coefficient of `W_j` in `δ_k⁻¹ e^{νN_k²T_k} e^{tΔ}u₀`
    /// (`M⁻¹u₀` at `T₀ = 0`), for `j = 0 … n`.
    pub log10_coefficients: Vec<f64>,
    pub dominant: usize,
}

impl ScheduleRow {
    /// Largest coefficient other than the rescaled one.
    pub fn max_off_diagonal(&self) -> f64 {
        let worst = self
            .log10_coefficients
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != self.k)
            .map(|(_, l)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        10f64.powf(worst)
    }
}

/// Predicted dominant term at `T₀ = 0, T₁, …, T_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DominanceSchedule {
    pub margin: f64,
    pub rows: Vec<ScheduleRow>,
}

impl DominanceSchedule {
    pub fn dominant_indices(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.dominant).collect()
    }

    /// Every off-diagonal coefficient is at most `1/margin`.
    pub fn separated(&self) -> bool {
        self.rows.iter().all(|r| r.max_off_diagonal() <= 1.0 / self.margin)
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (j, x)| if *x > v[best] { j } else { best })
}

/// Coefficients `δ_j e^{−νN_j²T_k} / (δ_k e^{−νN_k²T_k})`, with `δ₀ = M`,
/// evaluated in the working precision of `constants`.
pub fn dominance_schedule(constants: &ScenarioConstants) -> Result<DominanceSchedule, ScenarioError> {
    let mut hp = HighPrecision::new(constants.precision())?;
    let n = constants.n();
    let ln_amp = |hp: &mut HighPrecision, j: usize| {
        if j == 0 {
            hp.ln_f64(constants.amplitude())
        } else {
            constants.ln_delta(j).clone()
        }
    };
    let decay = |hp: &mut HighPrecision, j: usize, t: f64| {
        let sq = match constants.frequency(j) {
            Some(v) => hp.int(v as u128 * v as u128),
            None => {
                let two = hp.scale(constants.ln_frequency(j), 2.0);
                hp.exp(&two)
            }
        };
        hp.scale(&sq, -constants.nu() * t)
    };
    let mut rows = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = constants.time(k);
        let own_amp = ln_amp(&mut hp, k);
        let own_decay = decay(&mut hp, k, t);
        let own = hp.add(&own_amp, &own_decay);
        let mut logs = Vec::with_capacity(n + 1);
        for j in 0..=n {
            if j == k {
                logs.push(0.0);
                continue;
            }
            let a = ln_amp(&mut hp, j);
            let d = decay(&mut hp, j, t);
            let l = hp.sub(&hp.add(&a, &d), &own);
            logs.push(log10_of_ln(&l));
        }
        let dominant = argmax(&logs);
        rows.push(ScheduleRow { k, time: t, log10_coefficients: logs, dominant });
    }
    Ok(DominanceSchedule { margin: constants.margin(), rows })
}

/// Schedule measured from the exact heat flow of the assembled datum.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatDominance {
    pub rows: Vec<ScheduleRow>,
}

impl HeatDominance {
    pub fn dominant_indices(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.dominant).collect()
    }
}

/// Evolves `M W₀ + Σ δ_j W_j` by `e^{νtΔ}` alone and reads off each
/// coefficient by L² projection onto `W_j`; the shells of distinct `N_j`
/// are orthogonal, so the projections are exact.
pub fn heat_dominance(constants: &ScenarioConstants, fields: &[Field]) -> Result<HeatDominance, ScenarioError> {
    let n = constants.n();
    if fields.len() != n + 1 {
        return Err(ScenarioError::Count { what: "fields", expected: n + 1, found: fields.len() });
    }
    let amp = |j: usize| if j == 0 { constants.amplitude() } else { constants.delta(j) };
    let mut u0 = fields[0].scaled(amp(0));
    for (j, w) in fields.iter().enumerate().skip(1) {
        u0.axpy(amp(j), w);
    }
    let norms: Vec<f64> = fields.iter().map(|w| w.inner(w)).collect();
    let mut rows = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = constants.time(k);
        let u = u0.heat_propagate(constants.nu() * t, 1.0)?;
        let nk = frequency_f64(constants, k)?;
        let rescale = (constants.nu() * nk * nk * t).exp() / amp(k);
        let logs: Vec<f64> =
            fields.iter().zip(&norms).map(|(w, nw)| (u.inner(w) / nw * rescale).abs().log10()).collect();
        let dominant = argmax(&logs);
        rows.push(ScheduleRow { k, time: t, log10_coefficients: logs, dominant });
    }
    Ok(HeatDominance { rows })
}

pub(crate) fn frequency_f64(constants: &ScenarioConstants, k: usize) -> Result<f64, ScenarioError> {
    constants.frequency(k).map(|v| v as f64).ok_or(ScenarioError::NotDeskScale { slot: k })
}
