#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::path::PathBuf;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vortexlab::beltrami::{rational_sphere_points, shear_beltrami};
use vortexlab::io::*;
use vortexlab::spectral::{Grid, C};
use vortexlab::Field;

fn grid(n: usize) -> Grid {
    Grid::new(n).unwrap()
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn random_field(n: usize, seed: u64, modes: usize) -> Field {
    let g = grid(n);
    let b = g.band();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let list: Vec<_> = (0..modes)
        .map(|_| {
            let k = [0; 3].map(|_| rng.gen_range(-b..=b));
            let a = [0; 3].map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            (k, a)
        })
        .collect();
    Field::synthesize(g, &list, true).unwrap()
}

/// The frozen reference field: two conjugate pairs with exactly representable
/// amplitudes including a subnormal.
fn reference_field() -> Field {
    let z = |re: f64, im: f64| C::new(re, im);
    let modes = vec![
        ([1, 0, 0], [z(0.0, 0.0), z(0.25, -0.5), z(0.125, 1.0)]),
        ([-1, 0, 0], [z(0.0, 0.0), z(0.25, 0.5), z(0.125, -1.0)]),
        ([0, -2, 1], [z(1.5, 2f64.powi(-40)), z(0.0, 0.0), z(-0.75, 5e-324)]),
        ([0, 2, -1], [z(1.5, -(2f64.powi(-40))), z(0.0, 0.0), z(-0.75, -5e-324)]),
    ];
    Field::synthesize(grid(8), &modes, false).unwrap()
}

const REFERENCE_META: SnapshotMeta = SnapshotMeta { nu: 0.05, time: 1.25, alpha: 1.0 };

/// Byte offset of the payload entry for `k` and component `c`.
fn offset(n: i64, k: [i64; 3], c: usize) -> usize {
    let pos = |x: i64| (x + n / 2 - 1) as usize;
    let n = n as usize;
    let entry = (pos(k[0]) * n + pos(k[1])) * n + pos(k[2]);
    HEADER_LEN + 48 * entry + 16 * c
}

fn read_f64(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

#[test]
#[ignore = "rewrites the frozen reference snapshot"]
fn regenerate_reference_snapshot() {
    write_snapshot(&reference_field(), &REFERENCE_META, &data("reference_n8.vxf")).unwrap();
}

#[test]
fn reference_snapshot_parses_to_documented_values() {
    let bytes = std::fs::read(data("reference_n8.vxf")).unwrap();
    assert_eq!(bytes.len(), 52 + 8 * 6 * 512);
    assert_eq!(&bytes[..4], b"VXF1");
    assert_eq!(bytes[4..12], 8u64.to_le_bytes());
    assert_eq!(bytes[12..20], [0x9a, 0x99, 0x99, 0x99, 0x99, 0x99, 0xa9, 0x3f]);
    // Zero-mean but not divergence-free: k = (0, -2, 1) has k·û ≠ 0.
    assert_eq!(bytes[36..44], 2u64.to_le_bytes());
    assert_eq!(bytes[44..52], 3072u64.to_le_bytes());
    // Hand-located entries, independent of the decoder.
    assert_eq!(read_f64(&bytes, offset(8, [1, 0, 0], 1)), 0.25);
    assert_eq!(read_f64(&bytes, offset(8, [1, 0, 0], 1) + 8), -0.5);
    assert_eq!(read_f64(&bytes, offset(8, [-1, 0, 0], 2) + 8), -1.0);
    assert_eq!(read_f64(&bytes, offset(8, [0, -2, 1], 0) + 8), 2f64.powi(-40));
    assert_eq!(read_f64(&bytes, offset(8, [0, 2, -1], 0) + 8), -(2f64.powi(-40)));
    assert_eq!(read_f64(&bytes, offset(8, [0, -2, 1], 2) + 8).to_bits(), 1);
    assert_eq!(read_f64(&bytes, offset(8, [0, 2, -1], 2)), -0.75);

    let s = decode_snapshot(&bytes).unwrap();
    assert_eq!(s.meta, REFERENCE_META);
    assert_eq!(s.field, reference_field());
    assert_eq!(s.field.coeff([0, -2, 1]).unwrap()[2].im, 5e-324);
    assert!(!s.field.flags().divergence_free && s.field.flags().zero_mean);
    assert_eq!(encode_snapshot(&s.field, &s.meta), bytes);
}

#[test]
fn file_round_trip_is_bit_exact() {
    let dir = std::env::temp_dir().join(format!("vxf-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("b2.vxf");
    let u: Field = shear_beltrami(2, grid(16)).unwrap();
    let meta = SnapshotMeta { nu: 0.05, time: 0.0, alpha: 0.75 };
    write_snapshot(&u, &meta, &path).unwrap();
    let back = read_snapshot(&path).unwrap();
    assert_eq!(back.field, u);
    assert_eq!(back.meta, meta);
    assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 1);
    assert!(matches!(read_snapshot(&dir.join("missing.vxf")), Err(SnapshotError::Io(_))));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn damaged_files_give_distinct_errors() {
    let bytes = encode_snapshot(&random_field(8, 3, 6), &SnapshotMeta::default());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    let magic = decode_snapshot(&bad).unwrap_err();
    assert!(matches!(magic, SnapshotError::MagicMismatch { .. }));
    let truncated = decode_snapshot(&bytes[..bytes.len() - 8]).unwrap_err();
    assert_eq!(truncated, SnapshotError::Truncated { expected: bytes.len(), found: bytes.len() - 8 });
    let header_only = decode_snapshot(&bytes[..30]).unwrap_err();
    assert!(matches!(header_only, SnapshotError::Truncated { expected: 52, .. }));
    let mut size = bytes.clone();
    size[44..52].copy_from_slice(&100u64.to_le_bytes());
    let mismatch = decode_snapshot(&size).unwrap_err();
    assert_eq!(mismatch, SnapshotError::HeaderPayloadMismatch { n: 8, declared: 100, expected: 3072 });
    let mut long = bytes.clone();
    long.extend_from_slice(&[0; 8]);
    let trailing = decode_snapshot(&long).unwrap_err();
    let mut grid_bad = bytes.clone();
    grid_bad[4..12].copy_from_slice(&12u64.to_le_bytes());
    let grid_err = decode_snapshot(&grid_bad).unwrap_err();
    assert_eq!(grid_err, SnapshotError::BadGrid(12));
    let mut mirror = bytes.clone();
    let at = offset(8, [1, 1, -1], 0);
    mirror[at..at + 8].copy_from_slice(&7.0f64.to_le_bytes());
    let reality = decode_snapshot(&mirror).unwrap_err();
    assert_eq!(reality, SnapshotError::RealityViolation { k: [1, 1, -1] });
    let codes = [magic.code(), truncated.code(), mismatch.code(), trailing.code(), grid_err.code(), reality.code()];
    for (i, a) in codes.iter().enumerate() {
        assert!(codes[i + 1..].iter().all(|b| a != b));
    }
}

#[test]
fn tables_print_seventeen_significant_digits() {
    assert_eq!(real17(0.1), "1.0000000000000001e-1");
    assert_eq!(real17(-2.0), "-2.0000000000000000e0");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let x: f64 = rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-300..300));
        assert_eq!(real17(x).parse::<f64>().unwrap(), x);
    }
    let mut t = CsvTable::new(&["a", "b"]);
    t.push_reals(&[1.0 / 3.0, 2.0]);
    let back = parse_table(&t.to_text()).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.column("a").unwrap(), vec![1.0 / 3.0]);
    assert!(parse_table("a,b\n1\n").is_none());
}

#[test]
fn point_table_lists_the_sphere() {
    let t = points_table(&rational_sphere_points(3));
    assert_eq!(t.header, ["k1", "k2", "k3", "N"]);
    assert_eq!(t.rows.len(), 24);
    assert!(t.rows.iter().all(|r| r[3] == "3"));
}

#[test]
fn atomic_write_replaces_the_target() {
    let dir = std::env::temp_dir().join(format!("vxf-atomic-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("out.csv");
    write_atomic(&path, b"first").unwrap();
    write_atomic(&path, b"second").unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), b"second");
    assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 1);
    assert!(write_atomic(&dir.join("no/such/dir/x"), b"x").is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn encode_decode_is_the_identity(seed in any::<u64>(), modes in 0usize..12, n in prop::sample::select(vec![8usize, 16])) {
        let u = random_field(n, seed, modes);
        let meta = SnapshotMeta { nu: 1.0 / (seed % 97 + 1) as f64, time: seed as f64, alpha: 0.5 };
        let bytes = encode_snapshot(&u, &meta);
        let back = decode_snapshot(&bytes).unwrap();
        prop_assert_eq!(&back.field, &u);
        for c in 0..3 {
            for (a, b) in back.field.component(c).iter().zip(u.component(c)) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
        prop_assert_eq!(back.field.flags(), u.flags());
        prop_assert_eq!(encode_snapshot(&back.field, &back.meta), bytes);
    }
}
