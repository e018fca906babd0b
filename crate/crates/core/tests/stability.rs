#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use vortexlab::beltrami::{shear_amplitude, shear_beltrami, shear_beltrami_axis};
use vortexlab::solver::{duhamel_decompose, Snapshot, Solver};
use vortexlab::spectral::{sample_grid, FourierField, Grid};
use vortexlab::stability::*;
use vortexlab::Field;

fn grid(n: usize) -> Grid {
    Grid::new(n).unwrap()
}

fn random_field(seed: u64, g: Grid, pairs: usize, kmax: i64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<_> = (0..pairs)
        .map(|_| {
            let k = [rng.gen_range(-kmax..=kmax), rng.gen_range(-kmax..=kmax), rng.gen_range(1..=kmax)];
            (k, [0; 3].map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        })
        .collect();
    FourierField::synthesize(g, &modes, true).unwrap().leray_project()
}

fn snapshot(t: f64, u: Field) -> Snapshot<f64> {
    Snapshot { t, u }
}

#[test]
fn zero_perturbation_has_zero_energy() {
    let z = Field::zeros(grid(8));
    let h = energy_history(&[snapshot(0.0, z.clone()), snapshot(1.0, z)], 4);
    assert!(h.h.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn single_shell_energy_counts_orders() {
    let d = 1e-3;
    let v = shear_beltrami::<f64>(1, grid(8)).unwrap().scaled(d);
    let h = energy_levels(&v, 5);
    for (m, hm) in h.iter().enumerate() {
        assert!((hm - d * d * (m as f64 + 1.0)).abs() < 1e-18, "m = {m}: {hm}");
    }
}

/// Σ_{j≤m} ∫|∇ʲv|² by grid quadrature of every derivative component.
fn physical_levels(v: &Field, r: usize) -> Vec<f64> {
    let g = v.grid();
    let cell = (2.0 * std::f64::consts::PI / g.n() as f64).powi(3);
    let mut out = Vec::new();
    let mut acc = 0.0;
    for j in 0..=r {
        let mut total = 0.0;
        for word in 0..3usize.pow(j as u32) {
            for c in 0..3 {
                let mut s = v.scalar(c);
                let mut w = word;
                for _ in 0..j {
                    s = s.partial(w % 3);
                    w /= 3;
                }
                total += s.to_physical().iter().map(|x| x * x).sum::<f64>() * cell;
            }
        }
        acc += total;
        out.push(acc);
    }
    out
}

#[test]
fn spectral_energy_matches_physical_quadrature() {
    let v = random_field(3, grid(16), 6, 4);
    let spec = energy_levels(&v, 3);
    let phys = physical_levels(&v, 3);
    for m in 0..=3 {
        assert!((spec[m] - phys[m]).abs() <= 1e-10 * phys[m], "m = {m}: {} vs {}", spec[m], phys[m]);
    }
}

#[test]
fn sup_norms_of_shear_match_closed_form() {
    let m = 1.7;
    for n in [1u32, 2, 3] {
        let w = shear_beltrami::<f64>(n, grid(16)).unwrap().scaled(m);
        for j in 0..=3 {
            let expect = shear_amplitude() * m * (n as f64).powi(j as i32);
            let got = sup_gradient_norm(&w, j, 2);
            assert!((got - expect).abs() <= 1e-12 * expect, "N = {n}, j = {j}: {got} vs {expect}");
        }
    }
}

#[test]
fn sup_norm_sampling_is_a_lower_bound_of_the_direct_sum() {
    let v = random_field(9, grid(8), 3, 2);
    let s = sup_gradient_norm(&v, 0, 2);
    let probe = sample_grid(grid(32), |x| {
        let p = v.eval_at(x);
        (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
    });
    let fine = probe.iter().cloned().fold(0.0, f64::max);
    assert!(s <= fine * (1.0 + 1e-12));
    assert!(s >= 0.9 * fine);
}

#[test]
fn q_is_one_without_reference_flow() {
    let times: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
    let zeros = vec![vec![0.0; 11]; 4];
    let q = q_recursion(&zeros, 4, &times).unwrap();
    assert!(q.q.iter().flatten().all(|&v| v == 1.0));
}

fn beltrami_sups(m: f64, nu: f64, n: f64, r: usize, times: &[f64]) -> Vec<Vec<f64>> {
    let c = shear_amplitude();
    (1..=r).map(|j| times.iter().map(|t| c * m * n.powi(j as i32) * (-nu * n * n * t).exp()).collect()).collect()
}

#[test]
fn q1_at_infinity_matches_closed_form() {
    let (m, nu, n) = (1.0, 0.1, 2.0);
    let horizon = 40.0 / (nu * n * n);
    let steps = 40_000;
    let times: Vec<f64> = (0..=steps).map(|i| horizon * i as f64 / steps as f64).collect();
    let q = q_recursion(&beltrami_sups(m, nu, n, 1, &times), 1, &times).unwrap();
    let c = shear_amplitude();
    let expect = 1.0 + c * c * m * m / (2.0 * nu);
    let got = q.q.last().unwrap()[1];
    assert!((got - expect).abs() <= 1e-6 * expect, "{got} vs {expect}");
}

#[test]
fn q_at_infinity_grows_like_the_corollary_bound() {
    let (m, nu) = (1.0, 0.1);
    for order in 1..=3usize {
        let mut ratios = Vec::new();
        for n in [2.0f64, 4.0, 8.0] {
            let horizon = 40.0 / (nu * n * n);
            let times: Vec<f64> = (0..=20_000).map(|i| horizon * i as f64 / 20_000.0).collect();
            let q = q_recursion(&beltrami_sups(m, nu, n, order, &times), order, &times).unwrap();
            let qinf = q.q.last().unwrap()[order];
            ratios.push(qinf / (1.0 + n.powi(2 * order as i32 - 2)));
        }
        // One constant fixed at N = 2 covers the larger frequencies.
        assert!(ratios.iter().all(|&r| r <= 1.5 * ratios[0]), "order {order}: {ratios:?}");
    }
}

#[test]
fn zero_run_fits_zero_constant() {
    let z = Field::zeros(grid(8));
    let snaps: Vec<_> = (0..5).map(|i| snapshot(i as f64 * 0.25, z.clone())).collect();
    let h = energy_history(&snaps, 2);
    let times = h.times.clone();
    let q = q_recursion(&vec![vec![0.0; 5]; 2], 2, &times).unwrap();
    let rep = verify_decay_envelope(&h, &q, 0.1, 0.9, 0.0, 2).unwrap();
    assert_eq!(rep.c_star, 0.0);
    assert!(rep.holds(0.0));
}

#[test]
fn envelope_rejects_bad_sigma_and_reports_explosion() {
    let v = shear_beltrami::<f64>(1, grid(8)).unwrap();
    let snaps = vec![snapshot(0.0, v.clone()), snapshot(1.0, v.scaled(1e12))];
    let h = energy_history(&snaps, 1);
    let q = q_recursion(&vec![vec![0.0; 2]], 1, &h.times).unwrap();
    assert_eq!(verify_decay_envelope(&h, &q, 0.1, 1.0, 0.0, 1).unwrap_err(), StabilityError::BadSigma(1.0));
    match verify_decay_envelope(&h, &q, 0.1, 0.9, 0.0, 1) {
        Err(StabilityError::Explosion { m, t, .. }) => assert!(t == 1.0 && m <= 1),
        other => panic!("{other:?}"),
    }
}

/// Desk perturbation of `e^{-νN²t} B_N` by a transverse unit shear.
fn desk_run(delta: f64, horizon: f64, dt: f64) -> (Vec<Snapshot<f64>>, Vec<Field>) {
    let g = grid(16);
    let (nu, n0) = (0.1, 2u32);
    let w0 = shear_beltrami::<f64>(n0, g).unwrap();
    let v0 = shear_beltrami_axis::<f64>(1, 0, g).unwrap().scaled(delta);
    let mut u0 = w0.clone();
    u0.axpy(1.0, &v0);
    let steps = (horizon / dt).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let snaps = Solver::new(g, nu, 1.0).unwrap().run(&u0, &times, dt).unwrap();
    let ws: Vec<Field> = times.iter().map(|t| w0.scaled((-nu * (n0 * n0) as f64 * t).exp())).collect();
    let vs = snaps.iter().zip(&ws).map(|(s, w)| snapshot(s.t, s.u.sub(w))).collect();
    (vs, ws)
}

#[test]
fn desk_envelope_is_finite_and_monotone_in_the_constant() {
    let (vs, ws) = desk_run(1e-3, 4.0, 0.1);
    let h = energy_history(&vs, 2);
    assert!(h.poincare_holds());
    for row in &h.h {
        assert!(row.windows(2).all(|p| p[0] <= p[1]));
    }
    let sups = sup_norm_histories(&ws, 2, 2);
    let q = q_recursion(&sups, 2, &h.times).unwrap();
    let s0: Vec<f64> = ws.iter().map(|w| sup_gradient_norm(w, 0, 2)).collect();
    let wn = time_integral_sq(&h.times, &s0);
    let rep = verify_decay_envelope(&h, &q, 0.1, 0.9, wn, 2).unwrap();
    assert!(rep.c_star.is_finite() && rep.c_star > 0.0);
    assert!(rep.holds(rep.c_star));
    assert!(rep.holds(rep.c_star * 2.0));
    assert!(!rep.holds(rep.c_star * 0.99));
}

#[test]
fn lin_and_bil_vanish_without_perturbation() {
    let (vs, ws) = desk_run(0.0, 0.5, 1.0 / 16.0);
    let snaps: Vec<_> = vs
        .iter()
        .zip(&ws)
        .map(|(v, w)| {
            let mut u = w.clone();
            u.axpy(1.0, &v.u);
            snapshot(v.t, u)
        })
        .collect();
    let w0 = ws[0].clone();
    let ledger = duhamel_decompose(&snaps, |t| w0.scaled((-0.4 * t).exp()), 0.1, 1.0).unwrap();
    let s = LinBilSample::from_ledger(&ledger, 0.0, 2.0, 1.0, 1, 0.5).unwrap();
    assert!(s.lin < 1e-14 && s.bil < 1e-14, "{s:?}");
}

#[test]
fn log_log_slope_recovers_power_laws() {
    let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(1.7))).collect();
    assert!((log_log_slope(&pts).unwrap() - 1.7).abs() < 1e-12);
    assert_eq!(log_log_slope(&pts[..1]), None);
}

#[test]
fn lin_bil_report_flags_wrong_scaling() {
    let good: Vec<LinBilSample> = [1e-4, 2e-4, 4e-4]
        .iter()
        .map(|&d| LinBilSample { delta1: d, n0: 4.0, n1: 1.0, lin: 0.3 * d, bil: 5.0 * d * d })
        .collect();
    let rep = verify_lin_bil_bounds(&good, 1).unwrap();
    assert!((rep.lin_slope - 1.0).abs() < 1e-12 && (rep.bil_slope - 2.0).abs() < 1e-12);
    assert!((rep.lin_constant - 0.3 * 16.0).abs() < 1e-9);
    let bad: Vec<_> = good.iter().map(|s| LinBilSample { bil: s.bil * s.delta1.powf(-0.5), ..*s }).collect();
    assert!(matches!(verify_lin_bil_bounds(&bad, 1), Err(StabilityError::Slope { term: "Bil", .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn q_is_monotone_in_time_and_order(seed in 0u64..1000, r in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let times: Vec<f64> = (0..20).scan(0.0, |t, _| { *t += rng.gen_range(0.01..0.3); Some(*t) }).collect();
        let sups: Vec<Vec<f64>> = (0..r).map(|_| (0..20).map(|_| rng.gen_range(0.0..2.0)).collect()).collect();
        let q = q_recursion(&sups, r, &times).unwrap();
        prop_assert!(q.q[0].iter().all(|&v| v == 1.0));
        for i in 0..times.len() {
            prop_assert_eq!(q.q[i][0], 1.0);
            prop_assert!(q.q[i].windows(2).all(|p| p[0] <= p[1]));
            if i > 0 {
                for m in 0..=r {
                    prop_assert!(q.q[i][m] >= q.q[i - 1][m]);
                }
            }
        }
    }

    #[test]
    fn energy_levels_are_ordered(seed in 0u64..1000) {
        let v = random_field(seed, grid(8), 4, 2);
        let h = energy_levels(&v, 5);
        prop_assert!(h[0] >= 0.0);
        prop_assert!(h.windows(2).all(|p| p[0] <= p[1]));
        prop_assert!(v.gradient_energy(1) >= v.gradient_energy(0) * (1.0 - 1e-12));
    }
}
