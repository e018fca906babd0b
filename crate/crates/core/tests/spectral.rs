use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use vortexlab::beltrami::shear_beltrami;
use vortexlab::spectral::{FourierField, Grid, ScalarField, SpectralError, C};
use vortexlab::Field;

fn c(re: f64, im: f64) -> C<f64> {
    Complex::new(re, im)
}

/// Random conjugate-closed mode list with `count` pairs inside |k_i| ≤ kmax.
fn random_modes(rng: &mut ChaCha8Rng, count: usize, kmax: i64) -> Vec<([i64; 3], [C<f64>; 3])> {
    let mut out = Vec::new();
    while out.len() < 2 * count {
        let k = [rng.gen_range(-kmax..=kmax), rng.gen_range(-kmax..=kmax), rng.gen_range(-kmax..=kmax)];
        if k == [0, 0, 0] || out.iter().any(|(q, _): &([i64; 3], _)| *q == k || *q == k.map(|x| -x)) {
            continue;
        }
        let a = [0; 3].map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        out.push((k, a));
        out.push((k.map(|x| -x), a.map(|z| z.conj())));
    }
    out
}

/// Independent trigonometric summation over an explicit mode list.
fn direct_sum(modes: &[([i64; 3], [C<f64>; 3])], x: [f64; 3]) -> [f64; 3] {
    let mut v = [0.0; 3];
    for (k, a) in modes {
        let ph = k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2];
        let e = c(ph.cos(), ph.sin());
        for i in 0..3 {
            v[i] += (a[i] * e).re;
        }
    }
    v
}

fn random_field(seed: u64, grid: Grid, pairs: usize, kmax: i64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FourierField::synthesize(grid, &random_modes(&mut rng, pairs, kmax), false).unwrap()
}

#[test]
fn grid_rejects_odd_and_small_sizes() {
    assert_eq!(Grid::new(6), Err(SpectralError::GridSize(6)));
    assert_eq!(Grid::new(12), Err(SpectralError::GridSize(12)));
    assert!(Grid::new(8).is_ok());
}

#[test]
fn empty_mode_list_is_zero_field() {
    let g = Grid::new(8).unwrap();
    let f: Field = FourierField::synthesize(g, &[], false).unwrap();
    for m in 0..4 {
        assert_eq!(f.sobolev_norm(m).value, 0.0);
    }
}

#[test]
fn synthesize_rejects_out_of_band_and_asymmetric_lists() {
    let g = Grid::new(8).unwrap();
    let a = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
    let err = FourierField::<f64>::synthesize(g, &[([4, 0, 0], a), ([-4, 0, 0], a)], false).unwrap_err();
    assert_eq!(err, SpectralError::OutOfBand { k: [4, 0, 0] });
    let err = FourierField::<f64>::synthesize(g, &[([1, 0, 0], a)], false).unwrap_err();
    assert!(matches!(err, SpectralError::RealityViolation { .. }));
    let f = FourierField::<f64>::synthesize(g, &[([1, 0, 0], a)], true).unwrap();
    // Re(e^{ix}) = cos x carries half the amplitude on each of ±k.
    assert!((f.coeff([1, 0, 0]).unwrap()[0] - c(0.5, 0.0)).norm() < 1e-15);
    assert!((f.coeff([-1, 0, 0]).unwrap()[0] - c(0.5, 0.0)).norm() < 1e-15);
}

#[test]
fn unit_shear_has_unit_norm() {
    let g = Grid::new(16).unwrap();
    let b: Field = shear_beltrami(1, g).unwrap();
    assert!((b.l2_norm() - 1.0).abs() < 1e-14);
}

#[test]
fn point_values_match_direct_summation() {
    let g = Grid::new(16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let modes = random_modes(&mut rng, 5, 7);
    let f: Field = FourierField::synthesize(g, &modes, false).unwrap();
    for _ in 0..100 {
        let x = [rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)];
        let a = f.eval_at(x);
        let b = direct_sum(&modes, x);
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn grid_values_match_direct_summation() {
    let g = Grid::new(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let modes = random_modes(&mut rng, 6, 3);
    let f: Field = FourierField::synthesize(g, &modes, false).unwrap();
    let p = f.to_physical();
    let n = g.n();
    for j in [0usize, 17, 200, 511] {
        let x = [g.coord(j / (n * n)), g.coord((j / n) % n), g.coord(j % n)];
        let b = direct_sum(&modes, x);
        for i in 0..3 {
            assert!((p[i][j] - b[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn curl_of_gradient_vanishes() {
    let g = Grid::new(16).unwrap();
    let s = ScalarField::<f64>::sample(g, |x| (2.0 * x[0] - x[2]).sin() + (x[1] + 3.0 * x[2]).cos());
    let r = s.gradient().curl();
    assert!(r.l2_norm() < 1e-13);
}

#[test]
fn leray_hand_computed_mode() {
    let g = Grid::new(8).unwrap();
    let a = [c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
    let f: Field = FourierField::synthesize(g, &[([1, 0, 0], a), ([-1, 0, 0], a)], false).unwrap();
    let p = f.leray_project();
    let got = p.coeff([1, 0, 0]).unwrap();
    assert_eq!(got, [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
}

#[test]
fn leray_annihilates_gradients_and_fixes_solenoidal_fields() {
    let g = Grid::new(16).unwrap();
    let s = ScalarField::<f64>::sample(g, |x| (x[0] + x[1]).sin() * x[2].cos());
    assert!(s.gradient().leray_project().l2_norm() < 1e-13);
    let u = random_field(3, g, 8, 5).leray_project();
    let again = u.leray_project();
    assert!(again.sub(&u).l2_norm() <= 1e-12 * u.l2_norm());
}

#[test]
fn sobolev_norms_of_shear_fields() {
    let g = Grid::new(16).unwrap();
    for n in [1u32, 2, 5] {
        let b: Field = shear_beltrami(n, g).unwrap();
        assert!((b.l2_norm() - 1.0).abs() < 1e-14);
    }
    let b2: Field = shear_beltrami(2, g).unwrap();
    // Single shell |k| = 2: 1 + 4 + 16 = 21.
    assert!((b2.sobolev_norm(2).value - 21f64.sqrt()).abs() < 1e-13);
}

#[test]
fn sobolev_report_matches_parseval_sum() {
    let g = Grid::new(16).unwrap();
    let u = random_field(11, g, 6, 6);
    let phys = u.to_physical();
    // Physical-space quadrature of |u|² is exact for band-limited data.
    let mean_sq: f64 =
        (0..g.phys_len()).map(|i| phys.iter().map(|p| p[i] * p[i]).sum::<f64>()).sum::<f64>() / g.phys_len() as f64;
    let l2 = (mean_sq * (2.0 * PI).powi(3)).sqrt();
    assert!((u.l2_norm() - l2).abs() < 1e-12 * l2);
}

#[test]
fn heat_rejects_negative_time() {
    let g = Grid::new(8).unwrap();
    let f: Field = FourierField::zeros(g);
    assert_eq!(f.heat_propagate(-1.0, 1.0), Err(SpectralError::NegativeTime(-1.0)));
}

#[test]
fn heat_is_identity_at_zero_and_exact_on_shear() {
    let g = Grid::new(16).unwrap();
    let u = random_field(2, g, 4, 4);
    assert_eq!(u.heat_propagate(0.0, 1.0).unwrap(), u);
    let b: Field = shear_beltrami(3, g).unwrap();
    let s = 0.37;
    let h = b.heat_propagate(s, 1.0).unwrap();
    let expect = b.scaled((-s * 9.0f64).exp());
    assert!(h.sub(&expect).l2_norm() < 1e-15);
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|x| x as f64).product()
}

#[test]
fn heat_kernel_inequalities_on_random_fields() {
    let g = Grid::new(16).unwrap();
    let mut violations = 0;
    for seed in 0..100u64 {
        let f = random_field(1000 + seed, g, 5, 7);
        let l2 = f.l2_norm();
        for &s in &[0.1, 1.0] {
            let h = f.heat_propagate(s, 1.0).unwrap();
            for m in 0..=4usize {
                let hm = h.sobolev_norm(m).value;
                if hm > factorial(m).sqrt() * s.powf(-(m as f64) / 2.0) * l2 * (1.0 + 1e-12) {
                    violations += 1;
                }
                if hm > (-s).exp() * f.sobolev_norm(m).value * (1.0 + 1e-12) {
                    violations += 1;
                }
            }
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn fractional_heat_uses_power_of_laplacian() {
    let g = Grid::new(16).unwrap();
    let b: Field = shear_beltrami(2, g).unwrap();
    let h = b.heat_propagate(0.01, 2.0).unwrap();
    assert!(h.sub(&b.scaled((-0.01f64 * 16.0).exp())).l2_norm() < 1e-15);
}

#[test]
fn single_precision_field_round_trips() {
    let g = Grid::new(8).unwrap();
    let a = [Complex::new(0.5f32, 0.0), Complex::new(0.0, 0.25), Complex::new(0.0, 0.0)];
    let f = FourierField::<f32>::synthesize(g, &[([1, 2, 0], a), ([-1, -2, 0], a.map(|z| z.conj()))], false).unwrap();
    let p = f.to_physical();
    let back = FourierField::<f32>::from_physical(g, [&p[0], &p[1], &p[2]]);
    assert!(back.sub(&f).l2_norm() < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn round_trip_reproduces_coefficients(seed in 0u64..10_000) {
        let g = Grid::new(16).unwrap();
        let u = random_field(seed, g, 6, 7);
        let p = u.to_physical();
        let back = FourierField::from_physical(g, [&p[0], &p[1], &p[2]]);
        prop_assert!(back.sub(&u).l2_norm() <= 1e-12 * u.l2_norm());
    }

    #[test]
    fn leray_is_idempotent_and_self_adjoint(s1 in 0u64..10_000, s2 in 0u64..10_000) {
        let g = Grid::new(8).unwrap();
        let u = random_field(s1, g, 5, 3);
        let v = random_field(s2.wrapping_add(77_777), g, 5, 3);
        let pu = u.leray_project();
        prop_assert!(pu.leray_project().sub(&pu).l2_norm() <= 1e-13 * (1.0 + pu.l2_norm()));
        let a = pu.inner(&v);
        let b = u.inner(&v.leray_project());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        prop_assert!(pu.divergence_residual() <= 1e-12);
    }

    #[test]
    fn curl_curl_is_minus_laplacian_on_solenoidal_fields(seed in 0u64..10_000) {
        let g = Grid::new(16).unwrap();
        let u = random_field(seed, g, 6, 6).leray_project();
        let lhs = u.curl().curl();
        let rhs = u.laplacian().scaled(-1.0);
        prop_assert!(lhs.sub(&rhs).l2_norm() <= 1e-12 * rhs.l2_norm());
    }

    #[test]
    fn heat_is_a_semigroup(seed in 0u64..10_000, s1 in 0.0f64..1.0, s2 in 0.0f64..1.0) {
        let g = Grid::new(8).unwrap();
        let u = random_field(seed, g, 5, 3);
        let a = u.heat_propagate(s1, 1.0).unwrap().heat_propagate(s2, 1.0).unwrap();
        let b = u.heat_propagate(s1 + s2, 1.0).unwrap();
        prop_assert!(a.sub(&b).l2_norm() <= 1e-14 * (1.0 + b.l2_norm()));
    }

    #[test]
    fn curl_output_is_solenoidal_and_zero_mean(seed in 0u64..10_000) {
        let g = Grid::new(8).unwrap();
        let w = random_field(seed, g, 5, 3).curl();
        prop_assert!(w.flags().divergence_free && w.flags().zero_mean);
        prop_assert!(w.divergence_residual() <= 1e-12);
        prop_assert_eq!(w.mean(), [0.0; 3]);
    }
}
