use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavelab::grid::{gradient, laplacian, partial, sobolev_norm};
use wavelab::io::{read_fields, write_fields};
use wavelab::{Grid3, ScalarField};

fn random_field(grid: Grid3, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::from_vec(grid, (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn gaussian(grid: Grid3) -> ScalarField {
    ScalarField::from_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp())
}

#[test]
fn grid_rejects_bad_sizes() {
    assert!(Grid3::new(12, 1.0).is_err());
    assert!(Grid3::new(4, 1.0).is_err());
    assert!(Grid3::new(16, -1.0).is_err());
    let g = Grid3::new(16, 3.0).unwrap();
    assert_eq!(g.spacing() * 16.0, 3.0);
    assert_eq!(g.coord(8), 0.0);
}

#[test]
fn field_length_mismatch_is_structural_error() {
    let g = Grid3::new(8, 1.0).unwrap();
    assert!(ScalarField::from_vec(g, vec![0.0; 10]).is_err());
}

#[test]
fn constant_field_spectrum_is_dc_only() {
    let g = Grid3::new(16, 2.0).unwrap();
    let f = ScalarField::from_fn(g, |_| 3.5);
    let hat = f.to_spectral();
    assert!((hat.data[0].re - 3.5 * g.len() as f64).abs() < 1e-9);
    let rest = hat.data[1..].iter().fold(0.0f64, |m, z| m.max(z.norm()));
    assert!(rest < 1e-12 * g.len() as f64);
}

#[test]
fn plane_wave_has_two_modes() {
    let g = Grid3::new(16, 5.0).unwrap();
    let l = g.length();
    let f = ScalarField::from_fn(g, |x| (2.0 * std::f64::consts::PI * x[0] / l).sin());
    let hat = f.to_spectral();
    let big: Vec<usize> = (0..g.len()).filter(|&i| hat.data[i].norm() > 1e-9).collect();
    assert_eq!(big, vec![g.index(1, 0, 0), g.index(15, 0, 0)]);
}

#[test]
fn round_trip_and_parseval_random_field() {
    let g = Grid3::new(16, 4.0).unwrap();
    let f = random_field(g, 3);
    let back = f.to_spectral().to_real();
    let err = f.data.iter().zip(back.data.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-12);
    let direct = f.dot(&f);
    let spectral = f.to_spectral().l2_norm_sq();
    assert!((direct - spectral).abs() / direct < 1e-10);
}

#[test]
fn sobolev_zero_matches_l2() {
    let g = Grid3::new(16, 4.0).unwrap();
    let mut f = random_field(g, 9);
    let n = f.l2_norm();
    f.scale(1.0 / n);
    let s0 = sobolev_norm(&f, 0.0);
    assert!((s0.value - 1.0).abs() < 1e-10);
    assert!(!s0.zero_mode_dropped);
}

#[test]
fn sobolev_one_on_sine() {
    let g = Grid3::new(16, 6.0).unwrap();
    let l = g.length();
    let k = 2.0 * std::f64::consts::PI / l;
    let f = ScalarField::from_fn(g, |x| (k * x[0]).sin());
    let expect = (k * k * l.powi(3) / 2.0).sqrt();
    assert!((sobolev_norm(&f, 1.0).value - expect).abs() / expect < 1e-12);
}

#[test]
fn sobolev_one_on_gaussian_matches_moments() {
    let g = Grid3::new(64, 16.0).unwrap();
    let f = gaussian(g);
    // ∫ r^2 e^{-r^2} d^3x = (3/2) π^{3/2}
    let expect = (1.5 * std::f64::consts::PI.powf(1.5)).sqrt();
    assert!((sobolev_norm(&f, 1.0).value - expect).abs() / expect < 1e-10);
}

#[test]
fn negative_order_flags_mean() {
    let g = Grid3::new(8, 2.0).unwrap();
    let f = ScalarField::from_fn(g, |x| 1.0 + x[0]);
    assert!(sobolev_norm(&f, -1.0).zero_mode_dropped);
    let l = g.length();
    let s = ScalarField::from_fn(g, |x| (2.0 * std::f64::consts::PI * x[1] / l).cos());
    assert!(!sobolev_norm(&s, -1.0).zero_mode_dropped);
}

#[test]
fn laplacian_of_gaussian() {
    let g = Grid3::new(64, 16.0).unwrap();
    let lap = laplacian(&gaussian(g));
    let mut err: f64 = 0.0;
    for idx in 0..g.len() {
        let x = g.point(idx);
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        if r2 < 25.0 {
            err = err.max((lap.data[idx] - (r2 - 3.0) * (-r2 / 2.0).exp()).abs());
        }
    }
    assert!(err < 1e-8, "err {err}");
}

#[test]
fn laplacian_of_sine_and_gradient_of_constant() {
    let g = Grid3::new(16, 3.0).unwrap();
    let k = 2.0 * std::f64::consts::PI / g.length();
    let f = ScalarField::from_fn(g, |x| (k * x[0]).sin());
    let lap = laplacian(&f);
    for (a, b) in lap.data.iter().zip(f.data.iter()) {
        assert!((a + k * k * b).abs() < 1e-11);
    }
    let c = ScalarField::from_fn(g, |_| 2.0);
    for comp in gradient(&c) {
        assert!(comp.max_abs() < 1e-12);
    }
}

#[test]
fn laplacian_is_divergence_of_gradient_for_smooth_field() {
    let g = Grid3::new(64, 16.0).unwrap();
    let f = ScalarField::from_fn(g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1] + 1.5 * x[2] * x[2]) / 2.0).exp() * (1.0 + x[0]));
    let [gx, gy, gz] = gradient(&f);
    let mut div = partial(&gx, 0);
    div.axpy(1.0, &partial(&gy, 1));
    div.axpy(1.0, &partial(&gz, 2));
    let lap = laplacian(&f);
    let rel = div.data.iter().zip(lap.data.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / lap.max_abs();
    assert!(rel < 1e-10, "rel {rel}");
}

#[test]
fn wvf1_round_trip_and_bad_magic() {
    let dir = std::env::temp_dir().join(format!("wvf1_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let g = Grid3::new(8, 2.5).unwrap();
    let a = random_field(g, 1);
    let b = random_field(g, 2);
    let path = dir.join("pair.wvf");
    write_fields(&path, &[&a, &b]).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"WVF1");
    assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), 8);
    assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 2);
    assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), 2.5);
    assert_eq!(bytes.len(), 28 + 2 * 8 * 512);
    let back = read_fields(&path).unwrap();
    assert_eq!(back, vec![a, b]);
    let bad = dir.join("bad.wvf");
    std::fs::write(&bad, b"XXXX0000").unwrap();
    assert!(read_fields(&bad).is_err());
}

fn shift_lattice(f: &ScalarField, s: [usize; 3]) -> ScalarField {
    let g = f.grid;
    let n = g.n();
    let mut out = ScalarField::zeros(g);
    for idx in 0..g.len() {
        let (i, j, k) = g.unflatten(idx);
        out.data[g.index((i + s[0]) % n, (j + s[1]) % n, (k + s[2]) % n)] = f.data[idx];
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval_holds(seed in 0u64..10_000) {
        let g = Grid3::new(8, 1.7).unwrap();
        let f = random_field(g, seed);
        let d = f.dot(&f);
        prop_assert!((d - f.to_spectral().l2_norm_sq()).abs() / d < 1e-10);
    }

    #[test]
    fn differentiation_commutes_with_lattice_shift(seed in 0u64..10_000, a in 0usize..8, b in 0usize..8, c in 0usize..8, axis in 0usize..3) {
        let g = Grid3::new(8, 2.0).unwrap();
        let f = random_field(g, seed);
        let lhs = partial(&shift_lattice(&f, [a, b, c]), axis);
        let rhs = shift_lattice(&partial(&f, axis), [a, b, c]);
        let err = lhs.data.iter().zip(rhs.data.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(err < 1e-11);
    }
}
