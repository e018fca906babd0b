use std::f64::consts::TAU;
use std::fmt::Write as _;

use super::constants::{real, Check, ScenarioConstants};
use super::datum::{build_initial_datum, default_fields, slot_axis};
use super::schedule::{dominance_schedule, DominanceSchedule};
use super::ScenarioError;
use crate::solver::Solver;
use crate::spectral::{FourierField, Grid};
use crate::topology::{classify_structures, evaluator, lattice_seeds, Verdict, WindingReport};

type Field = FourierField<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioMode {
    /// Conditions and dominance schedule only.
    VerifyOnly,
    /// Conditions, schedule, and a DNS of the default datum classified at
    /// every `T_k`.
    DeskDns,
}

/// Resolution and tracing parameters of the desk run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeskOptions {
    pub dt_max: f64,
    pub seeds: usize,
    /// Line parameter horizon; the vorticity is normalized to unit peak speed.
    pub tau_max: f64,
    pub tol: f64,
    /// A line lies in the plane normal to axis `a` when its displacement
    /// along `a` is at most this fraction of its largest displacement.
    pub planar_ratio: f64,
}

impl Default for DeskOptions {
    fn default() -> Self {
        DeskOptions { dt_max: 1e-2, seeds: 64, tau_max: 3.0 * TAU, tol: 1e-9, planar_ratio: 0.15 }
    }
}

/// Classification of the vorticity at one time `T_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeReport {
    pub k: usize,
    pub time: f64,
    pub predicted_dominant: usize,
    /// Normal of the winding plane of `W_k`: the parity expectation.
    pub expected_axis: usize,
    /// Fraction of seeds whose line lies in the plane normal to each axis.
    pub axis_fractions: [f64; 3],
    /// Axis holding more than half of all seeds, if any.
    pub observed_axis: Option<usize>,
    pub verdict: Verdict,
    pub undetermined_fraction: f64,
}

impl TimeReport {
    /// Determined and non-withheld.
    pub fn determined(&self) -> bool {
        self.observed_axis.is_some() && !matches!(self.verdict, Verdict::Withheld(_))
    }

    pub fn agrees(&self) -> bool {
        self.determined() && self.observed_axis == Some(self.expected_axis)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioReport {
    pub mode: ScenarioMode,
    pub checks: Vec<Check>,
    pub all_hold: bool,
    pub schedule: DominanceSchedule,
    pub q: Option<f64>,
    pub times: Vec<TimeReport>,
    /// Some time could not be classified; never coerced into agreement.
    pub inconclusive: bool,
}

impl ScenarioReport {
    pub fn all_agree(&self) -> bool {
        !self.inconclusive && self.times.iter().all(TimeReport::agrees)
    }

    /// `key = value` record with one block per time.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mode = match self.mode {
            ScenarioMode::VerifyOnly => "verify-only",
            ScenarioMode::DeskDns => "desk-dns",
        };
        let _ = writeln!(s, "mode = {mode}");
        for c in &self.checks {
            let _ = writeln!(s, "check.{}.{} = {}", c.condition.key(), c.index, c.holds);
        }
        let _ = writeln!(s, "all_hold = {}", self.all_hold);
        for row in &self.schedule.rows {
            let coeffs: Vec<String> = row.log10_coefficients.iter().map(|c| real(*c)).collect();
            let _ = writeln!(s, "schedule.{}.time = {}", row.k, real(row.time));
            let _ = writeln!(s, "schedule.{}.log10_coefficients = {}", row.k, coeffs.join(","));
            let _ = writeln!(s, "schedule.{}.dominant = {}", row.k, row.dominant);
        }
        if let Some(q) = self.q {
            let _ = writeln!(s, "q = {}", real(q));
        }
        for t in &self.times {
            let p = format!("time.{}", t.k);
            let _ = writeln!(s, "{p}.t = {}", real(t.time));
            let _ = writeln!(s, "{p}.predicted_dominant = {}", t.predicted_dominant);
            let _ = writeln!(s, "{p}.expected_axis = {}", t.expected_axis);
            let obs = t.observed_axis.map_or("undetermined".to_string(), |a| a.to_string());
            let _ = writeln!(s, "{p}.observed_axis = {obs}");
            let f = t.axis_fractions;
            let _ = writeln!(s, "{p}.axis_fractions = {},{},{}", real(f[0]), real(f[1]), real(f[2]));
            let _ = writeln!(s, "{p}.verdict = {:?}", t.verdict);
            let _ = writeln!(s, "{p}.undetermined_fraction = {}", real(t.undetermined_fraction));
            let _ = writeln!(s, "{p}.agrees = {}", t.agrees());
        }
        let _ = writeln!(s, "inconclusive = {}", self.inconclusive);
        s
    }
}

/// Verify-only: conditions and schedule. Desk DNS: additionally integrates
/// the default datum on `grid`, and at `T₀ = 0, T₁, …, T_n` classifies the
/// vortex lines by the normal of the plane they wind in.
pub fn run_scenario(
    constants: &ScenarioConstants,
    grid: Grid,
    mode: ScenarioMode,
    opts: &DeskOptions,
) -> Result<ScenarioReport, ScenarioError> {
    let schedule = dominance_schedule(constants)?;
    let mut report = ScenarioReport {
        mode,
        checks: constants.checks().to_vec(),
        all_hold: constants.all_hold(),
        schedule,
        q: None,
        times: Vec::new(),
        inconclusive: false,
    };
    if mode == ScenarioMode::VerifyOnly {
        return Ok(report);
    }
    let fields = default_fields(constants, grid)?;
    let datum = build_initial_datum(constants, &fields)?;
    report.q = Some(datum.q);
    let samples: Vec<f64> = (0..=constants.n()).map(|k| constants.time(k)).collect();
    let solver = Solver::new(grid, constants.nu(), 1.0)?;
    let snaps = solver.run(&datum.field, &samples, opts.dt_max)?;
    for (k, snap) in snaps.iter().enumerate() {
        let predicted = report.schedule.rows[k].dominant;
        report.times.push(classify_time(k, snap.t, &snap.u, predicted, opts));
    }
    report.inconclusive = report.times.iter().any(|t| !t.determined());
    Ok(report)
}

fn classify_time(k: usize, time: f64, u: &Field, predicted: usize, opts: &DeskOptions) -> TimeReport {
    let omega = u.curl();
    let peak = omega.max_speed(4);
    let w = evaluator(&omega, if peak > 0.0 { 1.0 / peak } else { 1.0 });
    let seeds = lattice_seeds(opts.seeds);
    let summary = classify_structures(&*w, &seeds, opts.tau_max, opts.tol);
    let mut counts = [0usize; 3];
    for rep in summary.reports.iter().flatten() {
        if let Some(a) = plane_normal(rep, opts.planar_ratio) {
            counts[a] += 1;
        }
    }
    let total = seeds.len().max(1) as f64;
    let axis_fractions = counts.map(|c| c as f64 / total);
    let observed_axis = (0..3).find(|&a| axis_fractions[a] > 0.5);
    TimeReport {
        k,
        time,
        predicted_dominant: predicted,
        expected_axis: slot_axis(k),
        axis_fractions,
        observed_axis,
        undetermined_fraction: summary.undetermined_fraction(),
        verdict: summary.verdict,
    }
}

/// Axis along which a classified line is (nearly) frozen; `None` when the
/// line is undetermined or frozen along two axes.
pub fn plane_normal(rep: &WindingReport, ratio: f64) -> Option<usize> {
    if rep.is_contractible().is_none() {
        return None;
    }
    let d = rep.displacement().map(f64::abs);
    let top = d.iter().copied().fold(0.0, f64::max);
    let frozen: Vec<usize> = (0..3).filter(|&a| d[a] <= ratio * top).collect();
    match frozen.as_slice() {
        [a] => Some(*a),
        _ => None,
    }
}
