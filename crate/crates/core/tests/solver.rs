#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use vortexlab::beltrami::{amplitudes, beltrami_project, compatible_amplitude, herglotz_sample, shear_beltrami};
use vortexlab::solver::{duhamel_decompose, run, step, Solver, SolverError, SolverState};
use vortexlab::spectral::{FourierField, Grid};
use vortexlab::Field;

fn grid(n: usize) -> Grid {
    Grid::new(n).unwrap()
}

fn random_solenoidal(seed: u64, g: Grid, pairs: usize, kmax: i64, amp: f64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for _ in 0..pairs {
        let k = [rng.gen_range(-kmax..=kmax), rng.gen_range(-kmax..=kmax), rng.gen_range(1..=kmax)];
        let a = [0; 3].map(|_| Complex::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)));
        modes.push((k, a));
    }
    FourierField::synthesize(g, &modes, true).unwrap().leray_project()
}

#[test]
fn beltrami_decay_is_exact() {
    let g = grid(32);
    let b: Field = shear_beltrami(2, g).unwrap();
    let snaps = run(&b, 0.05, 1.0, &[0.0, 0.5, 1.0], 1e-3).unwrap();
    assert_eq!(snaps[0].u, b);
    let exact = b.scaled((-0.2f64).exp());
    let err = snaps[2].u.sub(&exact).l2_norm() / exact.l2_norm();
    assert!(err <= 1e-8, "relative error {err:e}");
    let ratio = snaps[2].u.l2_norm() / snaps[1].u.l2_norm();
    assert!((ratio - (-0.05f64 * 4.0 * 0.5).exp()).abs() < 1e-12);
}

#[test]
fn multimode_eigenfield_decays_exactly() {
    let g = grid(16);
    let amp = compatible_amplitude::<f64>(amplitudes::quadratic([0.3, 0.1, -0.2]));
    let w = beltrami_project(&herglotz_sample(&amp, 3, g).unwrap(), 3).unwrap();
    let w = w.scaled(1.0 / w.l2_norm());
    let snaps = run(&w, 0.05, 1.0, &[1.0], 1e-2).unwrap();
    let exact = w.scaled((-0.05f64 * 9.0).exp());
    assert!(snaps[0].u.sub(&exact).l2_norm() / exact.l2_norm() <= 1e-8);
}

#[test]
fn fractional_dissipation_decays_with_fourth_power() {
    let g = grid(16);
    let b: Field = shear_beltrami(2, g).unwrap();
    let snaps = run(&b, 0.05, 2.0, &[0.5], 1e-2).unwrap();
    let exact = b.scaled((-0.05f64 * 16.0 * 0.5).exp());
    assert!(snaps[0].u.sub(&exact).l2_norm() / exact.l2_norm() <= 1e-8);
}

#[test]
fn zero_datum_stays_zero() {
    let g = grid(16);
    let z: Field = FourierField::zeros(g);
    let snaps = run(&z, 0.1, 1.0, &[0.3], 0.05).unwrap();
    assert_eq!(snaps[0].u.l2_norm(), 0.0);
}

#[test]
fn cfl_violation_suggests_step() {
    let g = grid(16);
    let u = random_solenoidal(1, g, 4, 3, 1.0);
    let state = SolverState { u, t: 0.0, nu: 0.1, alpha: 1.0 };
    match step(&state, 10.0) {
        Err(SolverError::Cfl { suggested, .. }) => assert!(suggested > 0.0 && suggested < 10.0),
        other => panic!("expected CFL rejection, got {other:?}"),
    }
}

#[test]
fn rejects_bad_samples_and_datum() {
    let g = grid(16);
    let b: Field = shear_beltrami(1, g).unwrap();
    assert_eq!(run(&b, 0.1, 1.0, &[0.5, 0.2], 0.1).unwrap_err(), SolverError::BadSamples);
    let grad = vortexlab::spectral::ScalarField::<f64>::sample(g, |x| x[0].sin()).gradient();
    assert_eq!(run(&grad, 0.1, 1.0, &[0.5], 0.1).unwrap_err(), SolverError::BadDatum);
}

/// Explicit Euler on du/dt = νΔu + P(u × curl u) with Richardson extrapolation
/// over three step sizes.
fn euler_oracle(u0: &Field, nu: f64, t: f64, steps: usize) -> Field {
    let solver = Solver::new(u0.grid(), nu, 1.0).unwrap();
    let euler = |m: usize| {
        let h = t / m as f64;
        let mut u = u0.clone();
        for _ in 0..m {
            let (n, _) = solver.nonlinear(&u);
            let mut du = u.laplacian().scaled(nu);
            du.axpy(1.0, &n);
            u.axpy(h, &du);
        }
        u
    };
    let e1 = euler(steps);
    let e2 = euler(2 * steps);
    let e4 = euler(4 * steps);
    // Eliminates the h and h² error terms.
    let mut r = e4.scaled(8.0 / 3.0);
    r.axpy(-2.0, &e2);
    r.axpy(1.0 / 3.0, &e1);
    r
}

#[test]
fn single_step_matches_euler_oracle_to_fourth_order() {
    let g = grid(16);
    let a = [Complex::new(0.0, 0.0), Complex::new(0.6, 0.2), Complex::new(0.0, 0.0)];
    let b = [Complex::new(0.5, -0.3), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)];
    let u0 = FourierField::synthesize(g, &[([1, 0, 0], a), ([0, 1, 1], b)], true).unwrap().leray_project();
    let nu = 0.1;
    let mut errs = Vec::new();
    for dt in [0.2, 0.1] {
        let state = SolverState { u: u0.clone(), t: 0.0, nu, alpha: 1.0 };
        let rk = step(&state, dt).unwrap().u;
        let oracle = euler_oracle(&u0, nu, dt, 400);
        errs.push(rk.sub(&oracle).l2_norm());
    }
    let order = (errs[0] / errs[1]).log2() - 1.0;
    assert!(order > 3.5, "local errors {errs:?}, global order {order}");
}

#[test]
fn energy_is_nonincreasing_and_mean_conserved() {
    let g = grid(16);
    let u0 = random_solenoidal(7, g, 6, 4, 0.5);
    let times: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
    let solver = Solver::new(g, 0.05, 1.0).unwrap();
    let mut diags = Vec::new();
    let snaps = solver.run_with_diagnostics(&u0, 0.0, &times, 0.01, |d| diags.push(*d)).unwrap();
    let mut prev = u0.l2_norm();
    for s in &snaps {
        let e = s.u.l2_norm();
        assert!(e <= prev * (1.0 + 1e-13));
        prev = e;
        assert!(s.u.mean().iter().all(|m| m.abs() <= 1e-14));
    }
    assert!(diags.iter().all(|d| d.divergence <= 1e-10));
    assert_eq!(diags.len(), 100);
}

fn desk_reference(g: Grid, m: f64, nu: f64, n0: u32) -> impl Fn(f64) -> Field {
    let b: Field = shear_beltrami(n0, g).unwrap();
    move |t| b.scaled(m * (-nu * (n0 * n0) as f64 * t).exp())
}

#[test]
fn duhamel_split_is_trivial_without_perturbation() {
    let g = grid(16);
    let w = desk_reference(g, 1.0, 0.05, 2);
    let times: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
    let snaps = run(&w(0.0), 0.05, 1.0, &times[1..], 1e-2).unwrap();
    let mut all = vec![vortexlab::solver::Snapshot { t: 0.0, u: w(0.0) }];
    all.extend(snaps);
    let ledger = duhamel_decompose(&all, &w, 0.05, 1.0).unwrap();
    for e in &ledger.entries {
        assert!(e.lin.l2_norm() < 1e-12 && e.bil.l2_norm() < 1e-12 && e.v.l2_norm() < 1e-12);
    }
}

#[test]
fn duhamel_residual_is_within_quadrature_estimate() {
    let g = grid(16);
    let (m, nu, n0) = (1.0, 0.05, 4u32);
    let w = desk_reference(g, m, nu, n0);
    let pert: Field = shear_beltrami::<f64>(1, g).unwrap().scaled(1e-3);
    let pert = pert.add(&random_solenoidal(3, g, 3, 2, 1e-3));
    let u0 = w(0.0).add(&pert);
    let times: Vec<f64> = (0..=32).map(|i| i as f64 / 32.0).collect();
    let snaps = run(&u0, nu, 1.0, &times, 1e-3).unwrap();
    let ledger = duhamel_decompose(&snaps, &w, nu, 1.0).unwrap();
    assert!(
        !ledger.any_flagged(),
        "{:?}",
        ledger.entries.iter().map(|e| (e.residual_h1, e.quad_error)).collect::<Vec<_>>()
    );
    let last = ledger.entries.last().unwrap();
    assert!(last.lin.l2_norm() > 0.0 && last.bil.l2_norm() > 0.0);
}
