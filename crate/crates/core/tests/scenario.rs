#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::f64::consts::LN_10;

use proptest::prelude::*;
use vortexlab::beltrami::{reynolds_beltrami, shear_beltrami, shear_beltrami_axis};
use vortexlab::scenario::*;
use vortexlab::solver::Solver;
use vortexlab::spectral::Grid;
use vortexlab::topology::WindingReport;
use vortexlab::Field;

fn grid(n: usize) -> Grid {
    Grid::new(n).unwrap()
}

fn ln_n(c: &ScenarioConstants, k: usize) -> f64 {
    c.log10_frequency(k) * LN_10
}

fn ln_d(c: &ScenarioConstants, k: usize) -> f64 {
    if k == 0 {
        c.amplitude().ln()
    } else {
        c.log10_delta(k) * LN_10
    }
}

/// `ln(ν T (N_a² − N_b²))` for `N_a > N_b`, safe when `N_a²` overflows.
fn ln_exponent_gap(c: &ScenarioConstants, a: usize, b: usize, t: f64) -> f64 {
    (c.nu() * t).ln() + 2.0 * ln_n(c, a) + (1.0 - (2.0 * (ln_n(c, b) - ln_n(c, a))).exp()).ln()
}

/// Independent double-precision evaluation of every condition in log form.
/// Returns `(condition, index, holds)`; only decisive cases are meaningful.
fn oracle(c: &ScenarioConstants) -> Vec<(Condition, usize, bool)> {
    let n = c.n();
    let r = c.r() as f64;
    let lm = c.margin().ln();
    let t = |k: usize| c.times()[k - 1];
    let sq = |k: usize| (c.frequency(k).unwrap() as f64).powi(2);
    let mut out = Vec::new();
    out.push((Condition::FrequencyChain, 0, ln_n(c, 1) + lm <= ln_n(c, 0)));
    if n >= 2 {
        out.push((Condition::FrequencyChain, 1, 2.0 * ln_n(c, 2) + lm <= ln_n(c, 1)));
    }
    out.push((Condition::GlobalStability, 1, ln_d(c, 1) + (r + 0.5) * ln_n(c, 1) + lm <= -r * ln_n(c, 0)));
    out.push((Condition::InitialSmallness, 1, ln_d(c, 1) + (r - 0.5) * ln_n(c, 1) + lm <= 0.0));
    // k = 1: the decay exponent is compared through its logarithm.
    let need = ln_d(c, 0) - ln_d(c, 1) + r * ln_n(c, 0) + lm;
    out.push((Condition::EarlierDecayed, 1, need <= 0.0 || ln_exponent_gap(c, 0, 1, t(1)) >= need.ln()));
    for k in 2..=n {
        let lhs = ln_d(c, k - 1) - ln_d(c, k) - c.nu() * (sq(k - 1) - sq(k)) * t(k);
        out.push((Condition::EarlierDecayed, k, lhs + lm <= -r * ln_n(c, k - 1)));
    }
    for k in 1..n {
        let lhs = ln_d(c, k + 1) - ln_d(c, k) + c.nu() * (sq(k) - sq(k + 1)) * t(k);
        out.push((Condition::LaterSuppressed, k, lhs + lm <= -r * ln_n(c, k + 1)));
    }
    let a = ln_d(c, 1) - 2.0 * ln_n(c, 0);
    let b = 2.0 * ln_d(c, 1) + (r + 1.0) * ln_n(c, 0) + (r + 2.0) * ln_n(c, 1);
    let top = a.max(b);
    let sum = top + ((a - top).exp() + (b - top).exp()).ln();
    let lhs = -ln_d(c, n) + c.nu() * sq(n) * t(n) + sum;
    out.push((Condition::DuhamelRemainder, n, lhs + lm <= 0.0));
    out
}

fn assert_oracle_agrees(c: &ScenarioConstants) {
    for (cond, k, holds) in oracle(c) {
        let check = c.checks().iter().find(|ch| ch.condition == cond && ch.index == k).unwrap();
        assert_eq!(check.holds, holds, "{cond:?} at {k}: slack {}", check.log10_slack);
    }
}

fn rigorous_pair() -> ScenarioConstants {
    choose_constants(1.0, 1.0, 7, &[1.0, 2.0], 1e3).unwrap()
}

/// Heat-only desk set with dominant index k at T_k.
fn desk_pair() -> (ScenarioConstants, Vec<Field>) {
    let c = desk_constants(1.0, 0.1, 7, &[1.0, 2.0], &[12, 6, 2], 0.01, 10.0).unwrap();
    let f = default_fields(&c, grid(32)).unwrap();
    (c, f)
}

#[test]
fn single_time_rigorous_set_passes_every_condition() {
    let c = choose_constants(1.0, 1.0, 7, &[1.0], 1e3).unwrap();
    assert!(c.all_hold(), "{}", c.to_text());
    assert_eq!(c.frequency(1), Some(2));
    assert!(c.frequency(0).unwrap() >= 2000);
    assert_eq!(c.precision(), 512);
    assert_oracle_agrees(&c);
}

#[test]
fn two_time_rigorous_set_passes_in_512_bits() {
    let c = rigorous_pair();
    assert!(c.all_hold(), "{}", c.to_text());
    assert_eq!(c.frequency(2), Some(2));
    assert_eq!(c.frequency(1), Some(4000));
    // N₀ is far beyond any integer type.
    assert_eq!(c.frequency(0), None);
    assert!(c.log10_frequency(0) > 5e6);
    assert!(c.delta(1) == 0.0 && c.log10_delta(1) < -5e7);
    assert_oracle_agrees(&c);
    for cond in Condition::ALL {
        assert!(c.flag(cond), "{cond:?}");
    }
}

#[test]
fn margin_one_is_satisfiable() {
    let c = choose_constants(1.0, 1.0, 7, &[1.0], 1.0).unwrap();
    assert!(c.all_hold());
    assert!(c.checks().iter().all(|ch| ch.log10_slack > 0.0));
}

#[test]
fn tampering_by_a_million_flips_a_flag() {
    let c = rigorous_pair();
    for k in 1..=2 {
        let t = c.with_delta_scaled(k, 1e6).unwrap();
        assert!(!t.all_hold(), "delta {k}");
    }
    for k in 0..=2 {
        let t = c.with_frequency_scaled(k, 1e6).unwrap();
        assert!(!t.all_hold(), "frequency {k}");
    }
    let t = c.with_delta_scaled(1, 1e6).unwrap();
    assert!(!t.flag(Condition::DuhamelRemainder));
    assert_eq!(t.recipe_constant(), None);
    let single = choose_constants(1.0, 1.0, 7, &[1.0], 1e3).unwrap();
    assert!(!single.with_delta_scaled(1, 1e6).unwrap().flag(Condition::DuhamelRemainder));
    assert!(!single.with_frequency_scaled(1, 1e6).unwrap().all_hold());
    assert!(!single.with_frequency_scaled(0, 1e6).unwrap().all_hold());
}

#[test]
fn binding_check_lists_failures_first() {
    let t = rigorous_pair().with_delta_scaled(1, 1e6).unwrap();
    assert!(!t.binding().unwrap().holds);
    let c = rigorous_pair();
    let b = c.binding().unwrap();
    assert!(b.holds && c.checks().iter().all(|ch| ch.log10_slack >= b.log10_slack));
}

#[test]
fn amplitudes_decrease_and_follow_the_rho_product() {
    let c = rigorous_pair();
    assert!(c.ln_delta(2) < c.ln_delta(1));
    let (prod, ratio) = c.rho_product_and_ratio(2).unwrap();
    let gap = to_f64(&prod) - to_f64(&ratio);
    assert!(gap.abs() <= 1e-9, "{gap}");
    let (prod, ratio) = c.rho_product_and_ratio(1).unwrap();
    assert!(to_f64(&prod) == 0.0 && to_f64(&ratio) == 0.0);
    // ρ₁ = e^{−ν N₁² (T₁ + T₂)/2} = e^{−2.4·10⁷}.
    assert_eq!(to_f64(c.ln_rho(1)), -2.4e7);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert_eq!(choose_constants(1.0, 1.0, 7, &[], 1e3), Err(ScenarioError::NoTimes));
    assert_eq!(choose_constants(1.0, 1.0, 7, &[2.0, 1.0], 1e3), Err(ScenarioError::TimesNotIncreasing));
    assert_eq!(choose_constants(1.0, 1.0, 7, &[0.0, 1.0], 1e3), Err(ScenarioError::TimesNotIncreasing));
    assert!(matches!(
        choose_constants(1.0, 1.0, 7, &[1.0], 0.5),
        Err(ScenarioError::BadParameter { name: "margin", .. })
    ));
    assert!(matches!(
        choose_constants(1.0, -1.0, 7, &[1.0], 10.0),
        Err(ScenarioError::BadParameter { name: "nu", .. })
    ));
    assert!(matches!(choose_constants(0.0, 1.0, 7, &[1.0], 10.0), Err(ScenarioError::BadParameter { name: "M", .. })));
    let opts = CascadeOptions { precision: 64, ..CascadeOptions::default() };
    assert!(matches!(
        choose_constants_with(1.0, 1.0, 7, &[1.0], 10.0, &opts),
        Err(ScenarioError::BadParameter { name: "precision", .. })
    ));
}

#[test]
fn nearly_equal_times_name_the_binding_condition() {
    let err = choose_constants(1.0, 1.0, 7, &[1.0, 1.0 + 1e-12], 1e3).unwrap_err();
    match err {
        ScenarioError::Unattainable { condition, index, log10_slack } => {
            // Both time-separation conditions fail; the tightest is reported.
            assert_eq!((condition, index), (Condition::EarlierDecayed, 2));
            assert!(log10_slack < 0.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn constants_text_round_trips() {
    for c in [rigorous_pair(), desk_pair().0, choose_constants(2.0, 0.5, 7, &[0.5], 100.0).unwrap()] {
        let text = c.to_text();
        assert!(text.starts_with("format = vortexlab-constants-1\n"));
        let back = ScenarioConstants::from_text(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);
    }
    let text = rigorous_pair().to_text();
    assert!(text.contains("check.duhamel_remainder.2 = true"));
    assert!(text.contains("all_hold = true"));
}

#[test]
fn constants_text_rejects_unknown_and_malformed_lines() {
    let text = rigorous_pair().to_text();
    let bad = format!("{text}colour = blue\n");
    assert!(
        matches!(ScenarioConstants::from_text(&bad), Err(ScenarioError::Parse { message, .. }) if message.contains("colour"))
    );
    let bad = format!("{text}no equals sign\n");
    let lines = text.lines().count();
    assert_eq!(
        ScenarioConstants::from_text(&bad),
        Err(ScenarioError::Parse { line: lines + 1, message: "expected `key = value`".into() })
    );
    let bad = text.replace("nu = 1\n", "");
    assert!(
        matches!(ScenarioConstants::from_text(&bad), Err(ScenarioError::Parse { message, .. }) if message.contains("`nu`"))
    );
    // Edited values are re-verified, not trusted.
    let edited = text.replace("N.1 = 4000", "N.1 = 4000000000");
    let c = ScenarioConstants::from_text(&edited).unwrap();
    assert!(!c.all_hold());
}

#[test]
fn schedule_self_coefficients_are_one_and_the_rest_below_the_margin() {
    let c = rigorous_pair();
    let s = dominance_schedule(&c).unwrap();
    assert_eq!(s.dominant_indices(), vec![0, 1, 2]);
    for row in &s.rows {
        assert_eq!(row.log10_coefficients[row.k], 0.0);
        assert!(row.max_off_diagonal() <= 1e-3);
    }
    assert!(s.separated());
    assert_eq!(s.rows[1].time, 1.0);
}

#[test]
fn heat_only_evolution_reproduces_the_schedule() {
    let (c, f) = desk_pair();
    let predicted = dominance_schedule(&c).unwrap();
    let measured = heat_dominance(&c, &f).unwrap();
    assert_eq!(predicted.dominant_indices(), vec![0, 1, 2]);
    assert_eq!(measured.dominant_indices(), predicted.dominant_indices());
    for (p, m) in predicted.rows.iter().zip(&measured.rows) {
        for (a, b) in p.log10_coefficients.iter().zip(&m.log10_coefficients) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }
    // Desk frequencies give only a partial separation.
    assert!(!predicted.separated());
    assert!(predicted.rows.iter().all(|r| r.max_off_diagonal() < 0.5));
}

#[test]
fn schedule_survives_a_common_time_shift() {
    let base = dominance_schedule(&rigorous_pair()).unwrap();
    let shifted = dominance_schedule(&choose_constants(1.0, 1.0, 7, &[1.5, 2.5], 1e3).unwrap()).unwrap();
    assert_eq!(base.dominant_indices(), shifted.dominant_indices());
    assert!(base.separated() && shifted.separated());
    let (c, f) = desk_pair();
    let d = desk_constants(1.0, 0.1, 7, &[1.25, 2.25], &[12, 6, 2], 0.01, 10.0).unwrap();
    assert_eq!(heat_dominance(&c, &f).unwrap().dominant_indices(), heat_dominance(&d, &f).unwrap().dominant_indices());
}

#[test]
fn single_term_datum_has_unit_rescale() {
    let c = desk_constants(1.0, 0.05, 7, &[1.0], &[8, 3], 0.0, 10.0).unwrap();
    let f = default_fields(&c, grid(32)).unwrap();
    let d = build_initial_datum(&c, &f).unwrap();
    assert!((d.q - 1.0).abs() <= 1e-15);
    assert!((d.field.l2_norm() - 1.0).abs() <= 1e-15);
    assert_eq!(d.q_constant, 0.0);
}

#[test]
fn desk_datum_is_rescaled_to_the_prescribed_norm() {
    let c = desk_constants(1.0, 0.05, 7, &[1.0], &[8, 3], 1e-3, 10.0).unwrap();
    let f = default_fields(&c, grid(32)).unwrap();
    let d = build_initial_datum(&c, &f).unwrap();
    assert!((d.field.l2_norm() - 1.0).abs() <= 1e-14);
    // Orthogonal unit shells: q = 1/√(1 + δ₁²).
    assert!((d.q - 1.0 / (1.0f64 + 1e-6).sqrt()).abs() <= 1e-15);
    assert!(d.q_constant <= 1.0);
    assert!(d.field.divergence_residual() <= 1e-12);
    let c3 = desk_constants(3.0, 0.05, 7, &[1.0], &[8, 3], 1e-3, 10.0).unwrap();
    assert!((build_initial_datum(&c3, &f).unwrap().field.l2_norm() - 3.0).abs() <= 1e-13);
}

#[test]
fn reynolds_datum_has_the_prescribed_reynolds_number() {
    let c = desk_constants(1.0, 0.05, 7, &[1.0], &[8, 3], 1e-3, 10.0).unwrap();
    let f = default_fields(&c, grid(32)).unwrap();
    let d = build_reynolds_datum(&c, &f).unwrap();
    let r = reynolds_number(&d.field, c.nu()).unwrap();
    assert!((r - 1.0).abs() <= 0.05, "{r}");
    let pure = reynolds_beltrami::<f64>(8, grid(32)).unwrap().scaled(0.05 * 2.0 * 8.0);
    let r = reynolds_number(&pure, 0.05).unwrap();
    assert!((r - 2.0).abs() <= 1e-10, "{r}");
}

#[test]
fn reynolds_number_of_the_three_shear_family() {
    let b: Field = reynolds_beltrami(8, grid(32)).unwrap();
    assert!((reynolds_number(&b, 1.0).unwrap() - 1.0 / 8.0).abs() <= 1e-10);
    assert!(reynolds_number(&b, 0.0).is_err());
}

#[test]
fn slot_fields_are_validated() {
    let c = desk_constants(1.0, 0.05, 7, &[1.0], &[8, 3], 1e-3, 10.0).unwrap();
    let g = grid(32);
    let f = default_fields(&c, g).unwrap();
    assert_eq!(build_initial_datum(&c, &f[..1]), Err(ScenarioError::Count { what: "fields", expected: 2, found: 1 }));
    let wrong = vec![f[0].clone(), shear_beltrami(2, g).unwrap()];
    assert!(matches!(build_initial_datum(&c, &wrong), Err(ScenarioError::NotBeltrami { slot: 1, frequency: 3, .. })));
    let coarse = desk_constants(1.0, 0.05, 7, &[1.0], &[8, 3], 1e-3, 10.0).unwrap();
    assert_eq!(
        default_fields(&coarse, grid(16)),
        Err(ScenarioError::FrequencyOutOfBand { slot: 0, frequency: 8, band: 7 })
    );
    let mixed = vec![f[0].clone(), shear_beltrami_axis(3, 0, grid(16)).unwrap()];
    assert_eq!(build_initial_datum(&c, &mixed), Err(ScenarioError::GridMismatch { slot: 1 }));
    assert_eq!(default_fields(&rigorous_pair(), g), Err(ScenarioError::NotDeskScale { slot: 0 }));
}

#[test]
fn default_fields_alternate_winding_planes() {
    assert_eq!([0, 1, 2, 3].map(slot_axis), [2, 0, 2, 0]);
    let (_, f) = desk_pair();
    let expected: [Field; 3] = [
        shear_beltrami(12, grid(32)).unwrap(),
        shear_beltrami_axis(6, 0, grid(32)).unwrap(),
        shear_beltrami(2, grid(32)).unwrap(),
    ];
    for (a, b) in f.iter().zip(&expected) {
        assert_eq!(a, b);
    }
}

#[test]
fn verify_only_report_carries_flags_and_schedule() {
    let c = rigorous_pair();
    let rep = run_scenario(&c, grid(16), ScenarioMode::VerifyOnly, &DeskOptions::default()).unwrap();
    assert!(rep.all_hold && rep.times.is_empty() && rep.q.is_none());
    assert_eq!(rep.schedule.dominant_indices(), vec![0, 1, 2]);
    let text = rep.to_text();
    assert!(text.starts_with("mode = verify-only\n"));
    assert!(text.contains("schedule.2.dominant = 2"));
    assert!(text.ends_with("inconclusive = false\n"));
}

#[test]
fn desk_dns_shows_the_rotated_winding_at_the_first_time() {
    let c = desk_constants(1.0, 0.05, 7, &[2.0], &[8, 2], 0.1, 10.0).unwrap();
    let rep = run_scenario(&c, grid(32), ScenarioMode::DeskDns, &DeskOptions::default()).unwrap();
    assert!(!rep.inconclusive, "{}", rep.to_text());
    assert_eq!(rep.times.len(), 2);
    assert_eq!(rep.times[0].observed_axis, Some(2));
    assert_eq!(rep.times[1].observed_axis, Some(0));
    assert_eq!(rep.times[1].predicted_dominant, 1);
    assert!(rep.all_agree());
    assert!(rep.to_text().contains("time.1.agrees = true"));
}

#[test]
fn unperturbed_desk_run_stays_with_the_base_winding() {
    let c = desk_constants(1.0, 0.05, 7, &[2.0], &[8, 2], 0.0, 10.0).unwrap();
    let rep = run_scenario(&c, grid(32), ScenarioMode::DeskDns, &DeskOptions::default()).unwrap();
    assert!(!rep.inconclusive);
    assert!(rep.times.iter().all(|t| t.observed_axis == Some(2)));
    assert!(rep.times[0].agrees() && !rep.times[1].agrees());
    assert!((rep.q.unwrap() - 1.0).abs() <= 1e-15);
}

#[test]
fn rescaled_datum_rescales_the_solution() {
    let c = desk_constants(1.0, 0.05, 7, &[2.0], &[8, 2], 0.1, 10.0).unwrap();
    let f = default_fields(&c, grid(32)).unwrap();
    let d = build_initial_datum(&c, &f).unwrap();
    let solver = Solver::new(grid(32), 0.05, 1.0).unwrap();
    let samples = [1.0, 2.0];
    let plain = solver.run(&d.field, &samples, 1e-2).unwrap();
    for q in [d.q, 0.9] {
        let scaled = solver.run(&d.field.scaled(q), &samples, 1e-2).unwrap();
        for (a, b) in plain.iter().zip(&scaled) {
            let rel = b.u.sub(&a.u.scaled(q)).l2_norm() / b.u.l2_norm();
            assert!(rel <= 1e-2, "q = {q}, t = {}: {rel}", a.t);
        }
    }
}

#[test]
fn plane_normal_needs_a_single_frozen_axis() {
    let open = |d: [f64; 3]| WindingReport::Open { monotone_axis: 0, direction: d, displacement: d };
    assert_eq!(plane_normal(&open([7.0, 3.0, 0.1]), 0.15), Some(2));
    assert_eq!(plane_normal(&open([7.0, 0.1, 0.1]), 0.15), None);
    assert_eq!(plane_normal(&WindingReport::Closed { winding: [0, 1, 1], period: 1.0 }, 0.15), Some(0));
    let und = WindingReport::Undetermined { reason: String::new(), displacement: [1.0, 1.0, 0.0] };
    assert_eq!(plane_normal(&und, 0.15), None);
}

#[test]
fn high_precision_helpers() {
    let mut hp = HighPrecision::new(256).unwrap();
    for x in [1.0, -3.25, 1e-300, 6.02e23, f64::MAX] {
        assert_eq!(to_f64(&hp.num(x)), x);
    }
    let big = hp.num(1e6);
    let e = hp.exp(&big);
    assert_eq!(to_f64(&e), f64::INFINITY);
    assert!((log10_of_ln(&hp.ln(&e)) - 1e6 / LN_10).abs() <= 1e-9);
    let terms = [hp.num(1.0), hp.num(2.0), hp.num(-1e9)];
    let s = to_f64(&hp.log_sum(&terms));
    assert!((s - (1f64.exp() + 2f64.exp()).ln()).abs() <= 1e-15);
    let x = hp.ln_f64(7.0);
    let text = hp.format(&x);
    assert_eq!(hp.parse(&text).unwrap(), x);
    assert!(hp.parse("seven").is_none());
    assert!(HighPrecision::new(MIN_PRECISION - 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chosen_constants_satisfy_every_invariant(
        m in 0.1..10.0f64,
        nu in 0.5..2.0f64,
        t1 in 0.2..3.0f64,
        gap in 0.5..3.0f64,
        log_margin in 1.0..4.0f64,
        two in any::<bool>(),
    ) {
        let times = if two { vec![t1, t1 + gap] } else { vec![t1] };
        let margin = 10f64.powf(log_margin);
        let c = choose_constants(m, nu, 7, &times, margin).unwrap();
        prop_assert!(c.all_hold());
        let n = c.n();
        for k in 1..n {
            prop_assert!(c.ln_delta(k + 1) < c.ln_delta(k));
            let (prod, ratio) = c.rho_product_and_ratio(k + 1).unwrap();
            let scale = to_f64(&ratio).abs().max(1.0);
            prop_assert!((to_f64(&prod) - to_f64(&ratio)).abs() <= 1e-12 * scale);
        }
        let s = dominance_schedule(&c).unwrap();
        prop_assert_eq!(s.dominant_indices(), (0..=n).collect::<Vec<_>>());
        prop_assert!(s.separated());
    }

    #[test]
    fn tampered_amplitudes_never_pass(k in 1usize..3, log_factor in 6.0..12.0f64) {
        let c = rigorous_pair();
        prop_assert!(!c.with_delta_scaled(k, 10f64.powf(log_factor)).unwrap().all_hold());
    }
}
