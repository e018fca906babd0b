use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vortexlab::beltrami::{
    amplitudes, beltrami_project, compatible_amplitude, eigen_residual, herglotz_sample, rational_sphere_points,
    reynolds_beltrami, shear_beltrami_axis, BeltramiError,
};
use vortexlab::io::{
    decode_snapshot, diagnostics_table, encode_snapshot, line_table, melnikov_table, points_table, real17, CsvTable,
    SnapshotError, SnapshotMeta, StoredSnapshot,
};
use vortexlab::melnikov::{
    breakdown_diagnostic, build_u0, find_zeros, probe_time, probe_vorticity, BreakdownOptions, MelnikovError,
    MelnikovProblem, ProfileH, ResonanceTarget,
};
use vortexlab::scenario::{
    choose_constants, choose_constants_with, desk_constants, dominance_schedule, run_scenario, CascadeOptions,
    DeskOptions, ScenarioConstants, ScenarioError, ScenarioMode, FORMAT as CONSTANTS_FORMAT,
};
use vortexlab::solver::{Solver, SolverError};
use vortexlab::spectral::{Grid, C};
use vortexlab::topology::{
    classify_structures, evaluator, lattice_seeds, trace_vortex_line, TopologyError, VectorField, WindingReport,
};
use vortexlab::Field;

use crate::config::Params;
use crate::output::{check_manifest, Run, MANIFEST_FORMAT};
use crate::CliError;

pub fn dispatch(p: &Params, out: PathBuf) -> Result<(), CliError> {
    match p.command.name {
        "beltrami-gen" => beltrami_gen(p, out),
        "simulate" => simulate(p, out),
        "trace" => trace(p, out),
        "classify" => classify(p, out),
        "melnikov" => melnikov(p, out),
        "scenario" => scenario(p, out),
        "constants" => constants(p, out),
        "verify" => verify(p),
        other => unreachable!("no pipeline for {other}"),
    }
}

fn beltrami_err(e: BeltramiError) -> CliError {
    CliError::Validation(e.to_string())
}

fn solver_err(e: SolverError) -> CliError {
    match e {
        SolverError::Cfl { .. } | SolverError::NonFinite { .. } => CliError::Numerical(e.to_string()),
        _ => CliError::Validation(e.to_string()),
    }
}

fn topology_err(e: TopologyError) -> CliError {
    CliError::Validation(e.to_string())
}

fn snapshot_err(path: &str, e: SnapshotError) -> CliError {
    CliError::Validation(format!("{path}: {e} (snapshot error {})", e.code()))
}

fn melnikov_err(e: MelnikovError) -> CliError {
    use MelnikovError::*;
    match e {
        NotCoprime { .. } | OutsideWindow { .. } | BadParameter { .. } | Truncation { .. } | TooFewSamples { .. } => {
            CliError::Validation(e.to_string())
        }
        _ => CliError::Numerical(e.to_string()),
    }
}

fn scenario_err(e: ScenarioError) -> CliError {
    match e {
        ScenarioError::Unattainable { .. } | ScenarioError::Unrepresentable { .. } | ScenarioError::Precision(_) => {
            CliError::Numerical(e.to_string())
        }
        ScenarioError::Solver(s) => solver_err(s),
        _ => CliError::Validation(e.to_string()),
    }
}

fn grid_of(p: &Params) -> Result<Grid, CliError> {
    let n: usize = p.count_as("grid")?;
    Grid::new(n).map_err(|e| p.reject("grid", e))
}

fn read_snapshot_input(p: &Params, run: &mut Run) -> Result<StoredSnapshot, CliError> {
    let path = p.text("input");
    let bytes = run.read_input(Path::new(path))?;
    decode_snapshot(&bytes).map_err(|e| snapshot_err(path, e))
}

fn beltrami_gen(p: &Params, out: PathBuf) -> Result<(), CliError> {
    let grid = grid_of(p)?;
    let n: u32 = p.count_as("N")?;
    let field: Field = match p.text("family") {
        "shear" => {
            let axis: usize = p.count_as("axis")?;
            if axis > 2 {
                return Err(p.reject("axis", "must be 0, 1 or 2"));
            }
            shear_beltrami_axis(n, axis, grid).map_err(beltrami_err)?
        }
        "reynolds" => reynolds_beltrami(n, grid).map_err(beltrami_err)?,
        "herglotz" => {
            let e: [f64; 3] =
                p.reals("direction").try_into().map_err(|_| p.reject("direction", "needs three entries"))?;
            herglotz_sample(&compatible_amplitude::<f64>(amplitudes::quadratic(e)), n, grid).map_err(beltrami_err)?
        }
        "random" => random_shell_field(n, grid, p.count("seed"))?,
        other => unreachable!("family {other} passed validation"),
    };
    let norm = field.l2_norm();
    if !(norm > 0.0) {
        return Err(p.reject("N", format!("the {} field of frequency {n} vanishes on this grid", p.text("family"))));
    }
    let field = field.scaled(1.0 / norm);
    let mut run = Run::start(out)?;
    run.write("field.vxf", &encode_snapshot(&field, &SnapshotMeta::default()))?;
    run.write("points.csv", points_table(&rational_sphere_points(n)).to_text().as_bytes())?;
    println!("l2_norm = {}", real17(field.l2_norm()));
    println!("eigen_residual = {}", real17(eigen_residual(&field, n)));
    run.finish(p)
}

/// Curl eigenfield with independent uniform amplitudes on the primitive
/// lattice points of the shell.
fn random_shell_field(n: u32, grid: Grid, seed: u64) -> Result<Field, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<([i64; 3], [C<f64>; 3])> = rational_sphere_points(n)
        .into_iter()
        .map(|pt| (pt.k, [0; 3].map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))))
        .collect();
    let raw = Field::synthesize(grid, &modes, true).map_err(|e| CliError::Validation(e.to_string()))?;
    beltrami_project(&raw, n).map_err(beltrami_err)
}

fn simulate(p: &Params, out: PathBuf) -> Result<(), CliError> {
    let mut run = Run::start(out)?;
    let (u0, t0) = if p.text("input").is_empty() {
        let grid = grid_of(p)?;
        let u: Field = shear_beltrami_axis(p.count_as("N")?, 2, grid).map_err(beltrami_err)?;
        (u, 0.0)
    } else {
        let s = read_snapshot_input(p, &mut run)?;
        (s.field, s.meta.time)
    };
    let (nu, alpha) = (p.real("nu"), p.real("alpha"));
    let times = p.reals("times");
    if times.is_empty() {
        return Err(p.reject("times", "at least one sample time is required"));
    }
    let solver = Solver::new(u0.grid(), nu, alpha).map_err(solver_err)?;
    let mut steps = Vec::new();
    let snaps = solver.run_with_diagnostics(&u0, t0, &times, p.real("dt"), |d| steps.push(*d)).map_err(solver_err)?;
    for (k, s) in snaps.iter().enumerate() {
        let meta = SnapshotMeta { nu, time: s.t, alpha };
        run.write(&format!("snapshot_{k:03}.vxf"), &encode_snapshot(&s.u, &meta))?;
        println!("t = {}  l2 = {}", real17(s.t), real17(s.u.l2_norm()));
    }
    run.write("diagnostics.csv", diagnostics_table(&steps).to_text().as_bytes())?;
    run.finish(p)
}

/// Vorticity of the input, rescaled to unit peak speed.
fn vorticity_of_input(p: &Params, run: &mut Run) -> Result<Box<dyn VectorField>, CliError> {
    let s = read_snapshot_input(p, run)?;
    let omega = s.field.curl();
    let peak = omega.max_speed(4);
    if !(peak > 0.0) {
        return Err(p.reject("input", "the vorticity vanishes; there are no vortex lines"));
    }
    Ok(evaluator(&omega, 1.0 / peak))
}

fn trace(p: &Params, out: PathBuf) -> Result<(), CliError> {
    let mut run = Run::start(out)?;
    let w = vorticity_of_input(p, &mut run)?;
    let (tau_max, tol) = (p.real("tau_max"), p.real("tol"));
    if tol < 1e-12 {
        return Err(topology_err(TopologyError::BadTolerance(tol)));
    }
    for (i, seed) in lattice_seeds(p.count_as("seeds")?).into_iter().enumerate() {
        match trace_vortex_line(&*w, seed, tau_max, tol) {
            Ok(line) => {
                run.write(&format!("line_{i:03}.csv"), line_table(&line).to_text().as_bytes())?;
                let state = match (&line.closure, &line.truncated) {
                    (Some(c), _) => format!("closed, period {}", real17(c.period)),
                    (None, Some(reason)) => format!("stopped: {reason}"),
                    (None, None) => "open".to_string(),
                };
                println!("line {i}: {} samples, {state}", line.points.len());
            }
            Err(e @ TopologyError::StagnantSeed { .. }) => println!("line {i}: skipped, {e}"),
            Err(e) => return Err(topology_err(e)),
        }
    }
    run.finish(p)
}

fn classify(p: &Params, out: PathBuf) -> Result<(), CliError> {
    let mut run = Run::start(out)?;
    let w = vorticity_of_input(p, &mut run)?;
    let (tau_max, tol) = (p.real("tau_max"), p.real("tol"));
    if tol < 1e-12 {
        return Err(topology_err(TopologyError::BadTolerance(tol)));
    }
    let seeds = lattice_seeds(p.count_as("seeds")?);
    let summary = classify_structures(&*w, &seeds, tau_max, tol);
    let mut t = CsvTable::new(&["seed", "x1", "x2", "x3", "kind", "contractible", "d1", "d2", "d3", "detail"]);
    for (i, (s, rep)) in summary.seeds.iter().zip(&summary.reports).enumerate() {
        let mut row = vec![i.to_string(), real17(s[0]), real17(s[1]), real17(s[2])];
        let (kind, detail, d) = match rep {
            Ok(w @ WindingReport::Closed { winding, period }) => {
                let detail = format!("winding {} {} {} period {}", winding[0], winding[1], winding[2], real17(*period));
                ("closed", detail, w.displacement())
            }
            Ok(WindingReport::Open { monotone_axis, displacement, .. }) => {
                ("open", format!("monotone axis {monotone_axis}"), *displacement)
            }
            Ok(WindingReport::Undetermined { reason, displacement }) => {
                ("undetermined", reason.replace(',', ";"), *displacement)
            }
            Err(e) => ("rejected", e.to_string().replace(',', ";"), [0.0; 3]),
        };
        let contractible =
            rep.as_ref().ok().and_then(WindingReport::is_contractible).map_or("unknown".to_string(), |b| b.to_string());
        row.extend([kind.to_string(), contractible, real17(d[0]), real17(d[1]), real17(d[2]), detail]);
        t.push(row);
    }
    run.write("classification.csv", t.to_text().as_bytes())?;
    println!("verdict = {:?}", summary.verdict);
    println!("undetermined_fraction = {}", real17(summary.undetermined_fraction()));
    run.finish(p)
}

fn melnikov(p: &Params, out: PathBuf) -> Result<(), CliError> {
    let target = ResonanceTarget::new(p.count_as("p")?, p.count_as("q")?).map_err(melnikov_err)?;
    let grid = grid_of(p)?;
    let (m, nu, eps) = (p.real("M"), p.real("nu"), p.real("eps"));
    let h = ProfileH::resonant(target);
    let problem = MelnikovProblem::new(target, m, nu, eps, h.clone(), grid).map_err(melnikov_err)?;
    let profile = problem.profile(p.count_as("samples")?).map_err(melnikov_err)?;
    let nodes = profile.nodes;
    let zeros = find_zeros(&profile, |x| problem.evaluate(x, 0.0, nodes).total()).map_err(melnikov_err)?;
    let breakdown = if p.flag("breakdown") {
        let u0 = build_u0(m, eps, &h, grid).map_err(melnikov_err)?;
        let t_probe = probe_time(&u0, nu, p.real("probe_ratio"));
        let field = probe_vorticity(&u0, nu, t_probe);
        Some(breakdown_diagnostic(&field, t_probe, target, &BreakdownOptions::default()).map_err(melnikov_err)?)
    } else {
        None
    };
    let mut run = Run::start(out)?;
    run.write("melnikov.csv", melnikov_table(&profile).to_text().as_bytes())?;
    let mut z = CsvTable::new(&["xi", "slope", "degenerate"]);
    for zero in &zeros.zeros {
        z.push(vec![real17(zero.xi), real17(zero.slope), zero.degenerate.to_string()]);
    }
    run.write("zeros.csv", z.to_text().as_bytes())?;
    println!("relative_deviation = {}", real17(profile.relative_deviation()));
    println!("nonlinear_fraction = {}", real17(profile.nonlinear_fraction()));
    println!("zeros = {} (all simple: {})", zeros.count(), zeros.all_simple());
    if let Some(report) = breakdown {
        let mut f = CsvTable::new(&["x2", "x3", "xi", "kind", "trace", "residual", "distance_to_zero"]);
        for fp in &report.fixed_points {
            f.push(vec![
                real17(fp.section[0]),
                real17(fp.section[1]),
                real17(fp.xi),
                format!("{:?}", fp.kind).to_lowercase(),
                real17(fp.trace),
                real17(fp.residual),
                real17(zeros.distance_to_nearest(fp.xi)),
            ]);
        }
        run.write("fixed_points.csv", f.to_text().as_bytes())?;
        println!("t_probe = {}", real17(report.t_probe));
        println!("breakdown = {:?}, {} fixed points", report.status, report.fixed_points.len());
    }
    run.finish(p)
}

fn schedule_table(c: &ScenarioConstants) -> Result<CsvTable, CliError> {
    let s = dominance_schedule(c).map_err(scenario_err)?;
    let mut header = vec!["k".to_string(), "time".to_string(), "dominant".to_string()];
    header.extend((0..=c.n()).map(|j| format!("log10_coefficient_{j}")));
    let mut t = CsvTable { header, rows: Vec::new() };
    for row in &s.rows {
        let mut r = vec![row.k.to_string(), real17(row.time), row.dominant.to_string()];
        r.extend(row.log10_coefficients.iter().map(|&x| real17(x)));
        t.push(r);
    }
    Ok(t)
}

fn checks_summary(c: &ScenarioConstants) {
    let failing = c.checks().iter().filter(|k| !k.holds).count();
    println!("checks = {} ({} failing)", c.checks().len(), failing);
    println!("all_hold = {}", c.all_hold());
    if let Some(b) = c.binding() {
        println!("binding = {}.{} (log10 slack {})", b.condition.key(), b.index, real17(b.log10_slack));
    }
}

fn scenario(p: &Params, out: PathBuf) -> Result<(), CliError> {
    let mut run = Run::start(out)?;
    let desk = p.text("mode") == "desk";
    let constants = if !p.text("constants").is_empty() {
        let bytes = run.read_input(Path::new(p.text("constants")))?;
        let text = String::from_utf8(bytes).map_err(|_| p.reject("constants", "file is not UTF-8"))?;
        ScenarioConstants::from_text(&text).map_err(scenario_err)?
    } else {
        let (m, nu, times, margin) = (p.real("M"), p.real("nu"), p.reals("times"), p.real("margin"));
        let r: u32 = p.count_as("r")?;
        if desk {
            let freqs = p.counts("frequencies");
            if freqs.is_empty() {
                return Err(p.reject("frequencies", "desk mode needs integer frequencies or a constants file"));
            }
            desk_constants(m, nu, r, &times, &freqs, p.real("delta1"), margin).map_err(scenario_err)?
        } else {
            choose_constants(m, nu, r, &times, margin).map_err(scenario_err)?
        }
    };
    let mode = if desk { ScenarioMode::DeskDns } else { ScenarioMode::VerifyOnly };
    let opts = DeskOptions { dt_max: p.real("dt"), seeds: p.count_as("seeds")?, ..DeskOptions::default() };
    let grid = if desk { grid_of(p)? } else { Grid::new(8).expect("valid grid") };
    let report = run_scenario(&constants, grid, mode, &opts).map_err(scenario_err)?;
    run.write("constants.txt", constants.to_text().as_bytes())?;
    run.write("schedule.csv", schedule_table(&constants)?.to_text().as_bytes())?;
    run.write("scenario.txt", report.to_text().as_bytes())?;
    checks_summary(&constants);
    for t in &report.times {
        let obs = t.observed_axis.map_or("undetermined".into(), |a| a.to_string());
        println!("T.{}: expected axis {}, observed {obs}, agrees {}", t.k, t.expected_axis, t.agrees());
    }
    run.finish(p)?;
    if !desk && !report.all_hold {
        return Err(CliError::Numerical("some cascade conditions fail at the chosen constants".into()));
    }
    Ok(())
}

fn constants(p: &Params, out: PathBuf) -> Result<(), CliError> {
    let opts = CascadeOptions {
        precision: p.count_as("precision")?,
        base_frequency: p.count("base_frequency"),
        ..CascadeOptions::default()
    };
    let r: u32 = p.count_as("r")?;
    let c = choose_constants_with(p.real("M"), p.real("nu"), r, &p.reals("times"), p.real("margin"), &opts)
        .map_err(scenario_err)?;
    let mut run = Run::start(out)?;
    run.write("constants.txt", c.to_text().as_bytes())?;
    run.write("schedule.csv", schedule_table(&c)?.to_text().as_bytes())?;
    checks_summary(&c);
    for k in 0..=c.n() {
        let f = c.frequency(k).map_or_else(|| format!("10^{}", real17(c.log10_frequency(k))), |v| v.to_string());
        println!("N.{k} = {f}");
    }
    run.finish(p)
}

/// Read-only: prints a report and writes nothing.
fn verify(p: &Params) -> Result<(), CliError> {
    let path = p.text("input");
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    if bytes.starts_with(b"VXF1") {
        let s = decode_snapshot(&bytes).map_err(|e| snapshot_err(path, e))?;
        let mut fresh = s.field.clone();
        fresh.refresh_flags();
        println!("snapshot grid = {}", s.field.grid().n());
        println!("nu = {}  time = {}  alpha = {}", real17(s.meta.nu), real17(s.meta.time), real17(s.meta.alpha));
        println!("l2_norm = {}", real17(s.field.l2_norm()));
        println!("divergence_residual = {}", real17(s.field.divergence_residual()));
        println!("stored flags = {:?}, recomputed = {:?}", s.field.flags(), fresh.flags());
        if fresh.flags() != s.field.flags() {
            return Err(CliError::Numerical("stored flags disagree with the coefficients".into()));
        }
        return Ok(());
    }
    let text = String::from_utf8(bytes).map_err(|_| p.reject("input", "neither a VXF1 snapshot nor a text file"))?;
    let first = text.lines().next().unwrap_or("");
    if first == format!("format = {CONSTANTS_FORMAT}") {
        let c = ScenarioConstants::from_text(&text).map_err(scenario_err)?;
        for k in c.checks() {
            println!("{}.{} = {} (log10 slack {})", k.condition.key(), k.index, k.holds, real17(k.log10_slack));
        }
        checks_summary(&c);
        if !c.all_hold() {
            return Err(CliError::Numerical("some cascade conditions fail".into()));
        }
        Ok(())
    } else if first == format!("format = {MANIFEST_FORMAT}") {
        let dir = Path::new(path).parent().unwrap_or(Path::new("."));
        let check = check_manifest(&text, dir)?;
        for line in &check.lines {
            println!("{line}");
        }
        if !check.ok {
            return Err(CliError::Numerical("manifest does not match the files on disk".into()));
        }
        Ok(())
    } else {
        Err(p.reject("input", "unrecognized file: expected a VXF1 snapshot, a constants file or a manifest"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_family_is_an_eigenfield() {
        let grid = Grid::new(16).unwrap();
        let u = random_shell_field(3, grid, 5).unwrap();
        assert!(u.l2_norm() > 0.0);
        assert!(eigen_residual(&u, 3) < 1e-12);
        assert_eq!(u, random_shell_field(3, grid, 5).unwrap());
        assert_ne!(u, random_shell_field(3, grid, 6).unwrap());
    }
}
