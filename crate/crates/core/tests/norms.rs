use proptest::prelude::*;
use wavelab::free_prop::simpson_nodes;
use wavelab::grid::{gradient, shift_field};
use wavelab::harness::ensemble::{member, DataFamily};
use wavelab::history::{FreeFrames, FreeSolution, History, SpaceTimeField};
use wavelab::norms::{
    angular_mixed_norm, fourier_kernel_identity, lorentz_quasinorm, lorentz_quasinorm_field, mixed_norm,
    planar_lorentz_norm, reversed_norm, reversed_norm_comoving, strichartz_admissible, time_weights,
    truncated_duhamel_norm, weighted_local_energy, weighted_local_energy_at, EstimateReport, FourierIdentityOptions,
    RatioSample,
};
use wavelab::potential::Trajectory;
use wavelab::{Grid3, ScalarField, WaveError};

fn gaussian(g: Grid3, sigma: f64) -> ScalarField {
    ScalarField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * sigma * sigma)).exp())
}

fn constant_history(u: &ScalarField, t0: f64, dt: f64, count: usize) -> SpaceTimeField {
    let mut h = SpaceTimeField::new(u.grid, t0, dt, true).unwrap();
    for _ in 0..count {
        h.push(u.clone(), Some(ScalarField::zeros(u.grid))).unwrap();
    }
    h
}

#[test]
fn time_weights_integrate_cubics() {
    let w = time_weights(9, 0.25);
    let total: f64 = w.iter().sum();
    assert!((total - 2.0).abs() < 1e-14);
    let cubic: f64 = w.iter().enumerate().map(|(i, w)| w * (i as f64 * 0.25).powi(3)).sum();
    assert!((cubic - 4.0).abs() < 1e-13);
    assert_eq!(time_weights(1, 0.1), vec![0.0]);
}

#[test]
fn mixed_norm_of_static_field() {
    let g = Grid3::new(16, 8.0).unwrap();
    let u = gaussian(g, 1.0);
    let hist = constant_history(&u, 0.0, 0.25, 9);
    let q = 4.0;
    let lq = (u.data.iter().map(|v| v.powi(4)).sum::<f64>() * g.cell_volume()).powf(0.25);
    let m = mixed_norm(&hist, 2.0, q).unwrap();
    assert!((m.value - 2.0f64.sqrt() * lq).abs() < 1e-12 * lq);
    assert!(!m.admissible);
    let sup = mixed_norm(&hist, f64::INFINITY, f64::INFINITY).unwrap();
    assert!((sup.value - 1.0).abs() < 1e-14);
    assert!(mixed_norm(&hist, 4.0, 12.0).unwrap().admissible);
    assert!(matches!(mixed_norm(&hist, 0.5, 2.0), Err(WaveError::Config(_))));
}

#[test]
fn admissibility_line() {
    assert!(strichartz_admissible(4.0, 12.0));
    assert!(strichartz_admissible(f64::INFINITY, 6.0));
    assert!(!strichartz_admissible(2.0, f64::INFINITY));
    assert!(!strichartz_admissible(4.0, 10.0));
}

#[test]
fn streamed_free_frames_match_stored_history() {
    let g = Grid3::new(16, 16.0).unwrap();
    let data = member(g, DataFamily::RandomBump { radius: 2.5, power: 8, k_max: 1.0, modes: 4 }, 5, 0).unwrap();
    let free = FreeSolution::new(&data, (0.0, 2.0));
    let mut stored = SpaceTimeField::new(g, 0.0, 0.125, true).unwrap();
    for n in 0..17 {
        stored.push_data(&free.data_at(n as f64 * 0.125).unwrap()).unwrap();
    }
    let streamed = FreeFrames::new(&data, 0.0, 0.125, 17);
    let a = mixed_norm(&stored, 4.0, 12.0).unwrap().value;
    let b = mixed_norm(&streamed, 4.0, 12.0).unwrap().value;
    assert!((a - b).abs() < 1e-10 * a);
    let a = weighted_local_energy(&stored, 0.5, 0.1).unwrap();
    let b = weighted_local_energy(&streamed, 0.5, 0.1).unwrap();
    assert!((a - b).abs() < 1e-9 * a);
    let traj = Trajectory::linear(0.3);
    let a = reversed_norm(&stored, &traj).unwrap().value;
    let b = reversed_norm(&streamed, &traj).unwrap().value;
    let c = reversed_norm_comoving(&FreeFrames::new(&data, 0.0, 0.125, 17).comoving(traj), &traj).unwrap().value;
    assert!((a - b).abs() < 1e-10 * a);
    assert!((a - c).abs() < 1e-10 * a);
}

#[test]
fn reversed_norm_of_a_translating_profile() {
    let g = Grid3::new(32, 16.0).unwrap();
    let phi = gaussian(g, 1.0);
    let v = 0.4;
    let dt = 0.125;
    let count = 17;
    let mut hist = SpaceTimeField::new(g, 0.0, dt, false).unwrap();
    for n in 0..count {
        let t = n as f64 * dt;
        hist.push(shift_field(&phi, [-v * t, 0.0, 0.0]), None).unwrap();
    }
    let traj = Trajectory::linear(v);
    let r = reversed_norm(&hist, &traj).unwrap();
    let horizon = (count - 1) as f64 * dt;
    assert!((r.value - horizon.sqrt()).abs() < 1e-8, "{}", r.value);
    assert_eq!(r.argmax, [0.0, 0.0, 0.0]);
    assert!(!r.wrapped);
    let fast = Trajectory::linear(0.95);
    let mut long = SpaceTimeField::new(g, 0.0, 0.5, false).unwrap();
    for _ in 0..41 {
        long.push(phi.clone(), None).unwrap();
    }
    assert!(reversed_norm(&long, &fast).unwrap().wrapped);
}

/// Direct quadrature of `(∫_0^∞ (s^{1/p} f*(s))^q ds/s)^{1/q}` on a fine mesh.
fn lorentz_by_quadrature(values: &[f64], cell: f64, p: f64, q: f64) -> f64 {
    let mut sorted: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total = cell * sorted.len() as f64;
    let steps = 400_000;
    let mut acc = 0.0;
    // Substituting s = σ^2 removes the s^{-1} endpoint singularity for q/p >= 1/2.
    let smax = total.sqrt();
    let ds = smax / steps as f64;
    for i in 0..steps {
        let sigma = (i as f64 + 0.5) * ds;
        let s = sigma * sigma;
        let idx = ((s / cell) as usize).min(sorted.len() - 1);
        acc += (s.powf(1.0 / p) * sorted[idx]).powf(q) * 2.0 / sigma * ds;
    }
    acc.powf(1.0 / q)
}

#[test]
fn lorentz_quasinorm_matches_quadrature_and_special_cases() {
    let values = [3.0, -1.0, 0.5, 2.0, 0.0, 0.25];
    let cell = 0.3;
    for (p, q) in [(2.0, 1.0), (3.0, 2.0), (1.5, 4.0)] {
        let exact = lorentz_quasinorm(&values, cell, p, q).unwrap();
        let quad = lorentz_by_quadrature(&values, cell, p, q);
        assert!((exact - quad).abs() < 1e-4 * exact, "p={p} q={q}: {exact} vs {quad}");
    }
    let lp = (values.iter().map(|v: &f64| v.abs().powi(3)).sum::<f64>() * cell).powf(1.0 / 3.0);
    assert!((lorentz_quasinorm(&values, cell, 3.0, 3.0).unwrap() - lp).abs() < 1e-13);
    // Indicator of a set of measure m: (p/q)^{1/q} m^{1/p}.
    let ones = [1.0; 7];
    let m: f64 = 7.0 * cell;
    let (p, q) = (2.0f64, 1.0f64);
    let expect = (p / q).powf(1.0 / q) * m.powf(1.0 / p);
    assert!((lorentz_quasinorm(&ones, cell, p, q).unwrap() - expect).abs() < 1e-13);
    let weak = lorentz_quasinorm(&values, cell, 2.0, f64::INFINITY).unwrap();
    let expect = [3.0 * 0.3f64.sqrt(), 2.0 * 0.6f64.sqrt(), 0.9f64.sqrt(), 0.5 * 1.2f64.sqrt()]
        .into_iter()
        .fold(0.0, f64::max);
    assert!((weak - expect).abs() < 1e-14);
    assert_eq!(lorentz_quasinorm(&values, cell, f64::INFINITY, f64::INFINITY).unwrap(), 3.0);
    assert!(matches!(lorentz_quasinorm(&values, cell, f64::INFINITY, 2.0), Err(WaveError::Config(_))));
    assert!(matches!(lorentz_quasinorm(&values, cell, 1.0, 2.0), Err(WaveError::Config(_))));
}

proptest! {
    #[test]
    fn lorentz_quasinorm_is_homogeneous_and_rearrangement_invariant(
        mut values in prop::collection::vec(-5.0f64..5.0, 1..40),
        scale in 0.1f64..4.0,
        p in 1.1f64..6.0,
        q in 1.0f64..6.0,
    ) {
        let base = lorentz_quasinorm(&values, 0.2, p, q).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| -scale * v).collect();
        let s = lorentz_quasinorm(&scaled, 0.2, p, q).unwrap();
        prop_assert!((s - scale * base).abs() <= 1e-10 * (1.0 + s));
        values.reverse();
        let r = lorentz_quasinorm(&values, 0.2, p, q).unwrap();
        prop_assert!((r - base).abs() <= 1e-12 * (1.0 + base));
    }
}

#[test]
fn planar_norm_of_x1_independent_field() {
    let g = Grid3::new(8, 4.0).unwrap();
    let f = ScalarField::from_fn(g, |x| 1.0 + x[1] * x[1] - 0.5 * x[2]);
    let nn = 64;
    let plane = lorentz_quasinorm(&f.data[..nn], g.spacing().powi(2), 2.0, 1.0).unwrap();
    let planar = planar_lorentz_norm(&f, 2.0, 1.0).unwrap();
    assert!((planar - g.length() * plane).abs() < 1e-12 * planar);
    let full = lorentz_quasinorm_field(&f, 2.0, 2.0).unwrap();
    assert!((full - f.l2_norm()).abs() < 1e-12 * full);
}

#[test]
fn weighted_local_energy_matches_direct_sum() {
    let g = Grid3::new(16, 8.0).unwrap();
    let data = member(g, DataFamily::RandomBump { radius: 2.0, power: 8, k_max: 1.0, modes: 3 }, 9, 1).unwrap();
    let free = FreeSolution::new(&data, (0.0, 1.0));
    let dt = 0.125;
    let (nu, eps) = (0.5, 0.1);
    let mut stored = SpaceTimeField::new(g, 0.0, dt, true).unwrap();
    let mut direct = 0.0;
    for (s, w) in simpson_nodes(0.0, 1.0, dt) {
        let d = free.data_at(s).unwrap();
        let gr = gradient(&d.u);
        let mut dens = 0.0;
        for idx in 0..g.len() {
            let x = g.point(idx);
            let r = ((x[0] - nu * s).powi(2) + x[1] * x[1] + x[2] * x[2]).sqrt();
            let weight = (1.0 + r).powf(-0.5 - eps);
            let grad = (gr[0].data[idx].powi(2) + gr[1].data[idx].powi(2) + gr[2].data[idx].powi(2)).sqrt();
            dens += (weight * (grad + d.ut.data[idx].abs())).powi(2);
        }
        direct += w * dens * g.cell_volume();
        stored.push_data(&d).unwrap();
    }
    let got = weighted_local_energy(&stored, nu, eps).unwrap();
    assert!((got - direct.sqrt()).abs() < 1e-12 * got);
    let both = weighted_local_energy_at(&stored, nu, eps, &[0.5, 1.0]).unwrap();
    assert!((both[1] - got).abs() < 1e-14 * got);
    assert!(both[0] < both[1]);
    assert!(matches!(weighted_local_energy_at(&stored, nu, eps, &[0.3]), Err(WaveError::Config(_))));
    assert!(matches!(weighted_local_energy(&stored, 1.0, eps), Err(WaveError::Config(_))));
}

#[test]
fn angular_norm_of_radial_static_field() {
    let g = Grid3::new(32, 8.0).unwrap();
    let sigma = 0.9;
    let u = gaussian(g, sigma);
    let hist = constant_history(&u, 0.0, 0.25, 5);
    let radii = [0.7, 1.3];
    let value = angular_mixed_norm(&hist, 3.0, &radii, 4).unwrap();
    let profile = (-0.7f64 * 0.7 / (2.0 * sigma * sigma)).exp();
    let expect = 1.0f64.sqrt() * (4.0 * std::f64::consts::PI).powf(1.0 / 3.0) * profile;
    assert!((value - expect).abs() < 1e-4 * expect, "{value} vs {expect}");
    assert!(matches!(angular_mixed_norm(&hist, f64::INFINITY, &radii, 4), Err(WaveError::Config(_))));
    assert!(matches!(angular_mixed_norm(&hist, 2.0, &[5.0], 4), Err(WaveError::Config(_))));
}

#[test]
fn fourier_identity_holds_at_probes() {
    let g = Grid3::new(64, 16.0).unwrap();
    let f = gaussian(g, 0.5);
    for x in [[0.0, 0.0, 0.0], [1.0, 0.5, -0.3], [-1.7, 0.2, 0.9]] {
        let id = fourier_kernel_identity(&f, x, &FourierIdentityOptions::default()).unwrap();
        assert!(id.rel_difference < 1e-3, "{x:?}: {} vs {}", id.lhs, id.rhs);
    }
}

#[test]
fn truncated_duhamel_of_static_forcing_vanishes_before_cutoff() {
    let g = Grid3::new(16, 16.0).unwrap();
    let f = gaussian(g, 0.7);
    let hist = constant_history(&f, 0.0, 0.125, 17);
    let out = truncated_duhamel_norm(&hist, 0.5, &Trajectory::stationary()).unwrap();
    assert!(out.norm > 0.0 && out.norm.is_finite());
    assert!(out.bound_proxy > 0.0);
    let zero = constant_history(&ScalarField::zeros(g), 0.0, 0.125, 17);
    assert_eq!(truncated_duhamel_norm(&zero, 0.5, &Trajectory::stationary()).unwrap().norm, 0.0);
    assert!(matches!(truncated_duhamel_norm(&hist, 2.0, &Trajectory::stationary()), Err(WaveError::Config(_))));
    assert!(matches!(truncated_duhamel_norm(&hist, 0.3, &Trajectory::stationary()), Err(WaveError::Config(_))));
}

#[test]
fn truncated_duhamel_single_mode_closed_form() {
    // Static forcing cos(k x1): D_A(t) = (cos(k A) - cos(k t)) / k^2 cos(k x1) for t >= A.
    let g = Grid3::new(8, 8.0).unwrap();
    let k = 2.0 * std::f64::consts::PI / g.length();
    let f = ScalarField::from_fn(g, |x| (k * x[0]).cos());
    let dt = 1.0 / 64.0;
    let hist = constant_history(&f, 0.0, dt, 129);
    let a = 0.5;
    let out = truncated_duhamel_norm(&hist, a, &Trajectory::stationary()).unwrap();
    let nodes = simpson_nodes(a, 2.0, 1e-3);
    let expect: f64 = nodes.iter().map(|&(t, w)| w * (((k * a).cos() - (k * t).cos()) / (k * k)).powi(2)).sum();
    assert!((out.norm - expect.sqrt()).abs() < 1e-6 * expect.sqrt(), "{} vs {}", out.norm, expect.sqrt());
}

#[test]
fn estimate_report_bookkeeping() {
    let coarse = EstimateReport::new("reversed_endpoint", vec![RatioSample::new(1.0, 2.0), RatioSample::new(3.0, 2.0)]);
    assert_eq!(coarse.max_ratio, 1.5);
    assert_eq!(coarse.min_ratio(), 0.5);
    let fine = EstimateReport::new("reversed_endpoint", vec![RatioSample::new(3.3, 2.0)])
        .with_parameter("ell", 0.3)
        .with_refinement(&coarse);
    assert!((fine.refinement_trend.unwrap() - 0.1).abs() < 1e-12);
    assert_eq!(fine.parameters, vec![("ell".to_string(), 0.3)]);
    assert!(fine.hypotheses_hold());
    assert_eq!(RatioSample::new(0.0, 0.0).ratio, 0.0);
    assert!(RatioSample::new(1.0, 0.0).ratio.is_infinite());
}
