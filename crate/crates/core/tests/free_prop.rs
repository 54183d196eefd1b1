use wavelab::free_prop::{
    dispersive_decay_report, duhamel_free, half_wave, propagate_free, time_integral_identity, KirchhoffEvaluator,
    PropagatorMultipliers,
};
use wavelab::grid::{laplacian, CauchyData};
use wavelab::harness::ensemble::{member, DataFamily};
use wavelab::history::SpaceTimeField;
use wavelab::{ComplexField, Grid3, ScalarField, WaveError};

fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.data.iter().zip(b.data.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn multiplier_invariants() {
    let g = Grid3::new(16, 5.0).unwrap();
    let t = 1.37;
    let m = PropagatorMultipliers::new(&g, t);
    assert_eq!(m.sinc_mul[0], t);
    for (idx, k) in g.xi_abs().into_iter().enumerate().skip(1) {
        let s = m.cos_mul[idx].powi(2) + (k * m.sinc_mul[idx]).powi(2);
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_time_is_identity_and_single_mode_is_exact() {
    let g = Grid3::new(16, 4.0).unwrap();
    let k = 2.0 * std::f64::consts::PI / g.length();
    let u = ScalarField::from_fn(g, |x| (k * x[0]).sin());
    let data = CauchyData::new(u.clone(), ScalarField::zeros(g)).unwrap();
    let same = propagate_free(&data, 0.0).unwrap();
    assert!(max_diff(&same.u, &data.u) < 1e-14);
    let t = 0.83;
    let out = propagate_free(&data, t).unwrap();
    let mut expect = u.clone();
    expect.scale((k * t).cos());
    assert!(max_diff(&out.u, &expect) < 1e-13);
}

#[test]
fn group_law_and_energy_conservation() {
    let g = Grid3::new(32, 16.0).unwrap();
    let data = member(g, DataFamily::default(), 5, 0).unwrap();
    let a = propagate_free(&propagate_free(&data, 1.25).unwrap(), 2.5).unwrap();
    let b = propagate_free(&data, 3.75).unwrap();
    let scale = data.u.max_abs().max(data.ut.max_abs());
    assert!(max_diff(&a.u, &b.u) < 1e-10 * scale);
    assert!(max_diff(&a.ut, &b.ut) < 1e-10 * scale);
    let e0 = data.free_energy();
    assert!((b.free_energy() - e0).abs() / e0 < 1e-10);
    let back = wavelab::free_prop::propagate_free_periodic(&b, -3.75);
    assert!(max_diff(&back.u, &data.u) < 1e-10 * scale);
}

#[test]
fn budget_violation_is_config_error() {
    let g = Grid3::new(16, 8.0).unwrap();
    let data = member(g, DataFamily::VelocityBump { radius: 1.0, power: 4 }, 0, 0).unwrap();
    assert!(matches!(propagate_free(&data, 3.5), Err(WaveError::Config(_))));
    assert!(propagate_free(&data, 3.0).is_ok());
}

#[test]
fn strong_huygens_for_position_and_velocity_bumps() {
    let g = Grid3::new(64, 16.0).unwrap();
    let r = 3.5;
    for family in [DataFamily::PositionBump { radius: r, power: 24 }, DataFamily::VelocityBump { radius: r, power: 24 }] {
        let data = member(g, family, 0, 0).unwrap();
        for t in [1.5, 3.0, 4.5] {
            let out = propagate_free(&data, t).unwrap();
            let peak = out.u.max_abs();
            let mut outside: f64 = 0.0;
            for idx in 0..g.len() {
                let p = g.point(idx);
                let rho = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                if rho <= t - r || rho >= t + r {
                    outside = outside.max(out.u.data[idx].abs());
                }
            }
            assert!(outside < 1e-8 * peak, "t={t}: {outside} vs peak {peak}");
        }
    }
}

#[test]
fn half_wave_is_unitary_and_reversible() {
    let g = Grid3::new(16, 3.0).unwrap();
    let re = ScalarField::from_fn(g, |x| (x[0] * 1.3 + x[1]).sin() + x[2]);
    let im = ScalarField::from_fn(g, |x| (x[2] - x[0]).cos());
    let f = ComplexField::from_real(&re, &im).unwrap();
    let w = half_wave(&f, 0.7);
    assert!((w.l2_norm() - f.l2_norm()).abs() / f.l2_norm() < 1e-12);
    let back = half_wave(&w, -0.7);
    let err = back.data.iter().zip(f.data.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    assert!(err < 1e-12);
    let id = half_wave(&f, 0.0);
    assert!(id.data.iter().zip(f.data.iter()).all(|(a, b)| (a - b).norm() < 1e-13));
}

#[test]
fn half_wave_single_mode_phase() {
    let g = Grid3::new(8, 2.0).unwrap();
    let k = 2.0 * std::f64::consts::PI / g.length() * 2.0;
    let re = ScalarField::from_fn(g, |x| (k * x[1]).cos());
    let im = ScalarField::from_fn(g, |x| (k * x[1]).sin());
    let f = ComplexField::from_real(&re, &im).unwrap();
    let t = 0.4;
    let w = half_wave(&f, t);
    let ph = num_complex::Complex64::from_polar(1.0, k * t);
    for (a, b) in w.data.iter().zip(f.data.iter()) {
        assert!((a - b * ph).norm() < 1e-12);
    }
}

#[test]
fn kirchhoff_constant_velocity() {
    let g = Grid3::new(16, 8.0).unwrap();
    let c = 1.7;
    let data = CauchyData::new(ScalarField::zeros(g), ScalarField::from_fn(g, |_| c)).unwrap();
    let k = KirchhoffEvaluator::new(&data, 1, 1).unwrap();
    let v = k.eval([0.3, -0.2, 0.1], 1.4).unwrap();
    assert!((v.value - c * 1.4).abs() < 1e-12);
    assert!(k.eval([3.0, 0.0, 0.0], 1.5).is_err());
}

#[test]
fn kirchhoff_matches_radial_reduction_for_gaussian() {
    let g = Grid3::new(64, 16.0).unwrap();
    let w = |r: f64| (-r * r / 2.0).exp();
    let data = CauchyData::new(ScalarField::from_fn(g, |x| w((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())), ScalarField::zeros(g)).unwrap();
    let k = KirchhoffEvaluator::new(&data, 2, 3).unwrap();
    for (x, t) in [([0.5, 0.3, -0.2], 1.0), ([1.0, 0.0, 0.0], 2.5), ([0.3, -1.0, 0.5], 3.3)] {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) as f64;
        let r = r.sqrt();
        let exact = ((r + t) * w(r + t) + (r - t) * w(r - t)) / (2.0 * r);
        let v = k.eval(x, t).unwrap();
        assert!((v.value - exact).abs() < 1e-6, "{} vs {exact}", v.value);
    }
}

#[test]
fn kirchhoff_agrees_with_spectral_on_random_data() {
    let g = Grid3::new(64, 16.0).unwrap();
    let data = member(g, DataFamily::default(), 11, 0).unwrap();
    let k = KirchhoffEvaluator::new(&data, 2, 3).unwrap();
    for (idx, t) in [(g.index(34, 30, 33), 1.2), (g.index(28, 36, 31), 2.7), (g.index(32, 32, 32), 4.0)] {
        let spectral = propagate_free(&data, t).unwrap().u.data[idx];
        let v = k.eval(g.point(idx), t).unwrap();
        assert!((v.value - spectral).abs() < 1e-4, "{} vs {spectral}", v.value);
    }
}

#[test]
fn duhamel_zero_and_coverage() {
    let g = Grid3::new(8, 2.0).unwrap();
    let mut f = SpaceTimeField::new(g, 0.0, 0.1, false).unwrap();
    for _ in 0..6 {
        f.push(ScalarField::zeros(g), None).unwrap();
    }
    let out = duhamel_free(&f, 0.5).unwrap();
    assert_eq!(out.u.max_abs(), 0.0);
    assert!(matches!(duhamel_free(&f, 0.8), Err(WaveError::Config(_))));
}

#[test]
fn duhamel_static_single_mode_closed_form() {
    let g = Grid3::new(8, 2.0).unwrap();
    let k = 2.0 * std::f64::consts::PI / g.length();
    let phi = ScalarField::from_fn(g, |x| (k * x[2]).cos());
    let dt = 0.05;
    let mut f = SpaceTimeField::new(g, 0.0, dt, false).unwrap();
    for _ in 0..=20 {
        f.push(phi.clone(), None).unwrap();
    }
    let t = 1.0;
    let out = duhamel_free(&f, t).unwrap();
    let mut expect = phi.clone();
    expect.scale((1.0 - (k * t).cos()) / (k * k));
    assert!(max_diff(&out.u, &expect) < 1e-6);
}

#[test]
fn duhamel_recovers_manufactured_solution() {
    // w = t^2 phi has zero data and box-forcing 2 phi - t^2 Δphi.
    let g = Grid3::new(32, 16.0).unwrap();
    let phi = ScalarField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp());
    let lap = laplacian(&phi);
    let dt = 1.0 / 32.0;
    let mut f = SpaceTimeField::new(g, 0.0, dt, false).unwrap();
    for n in 0..=64 {
        let s = n as f64 * dt;
        let mut fs = phi.clone();
        fs.scale(2.0);
        fs.axpy(-s * s, &lap);
        f.push(fs, None).unwrap();
    }
    let t = 2.0;
    let out = duhamel_free(&f, t).unwrap();
    let mut expect = phi.clone();
    expect.scale(t * t);
    assert!(max_diff(&out.u, &expect) < 1e-6 * expect.max_abs());
}

#[test]
fn dispersive_report_slope_for_velocity_bump() {
    let g = Grid3::new(64, 16.0).unwrap();
    let data = member(g, DataFamily::VelocityBump { radius: 1.0, power: 8 }, 0, 0).unwrap();
    let times: Vec<f64> = (0..=8).map(|i| 1.0 + 0.5 * i as f64).collect();
    let rep = dispersive_decay_report(&data, &times).unwrap();
    assert!(rep.rows.iter().all(|r| r.budget_ok));
    assert!((rep.sup_slope + 1.0).abs() < 0.1, "slope {}", rep.sup_slope);
    assert!(rep.ratio_trend.abs() < 0.05);
}

#[test]
fn time_integral_identity_tail_shrinks() {
    let g = Grid3::new(64, 16.0).unwrap();
    let data = member(g, DataFamily::VelocityBump { radius: 1.0, power: 8 }, 0, 0).unwrap();
    let rows: Vec<_> = [2.0, 4.0, 6.0].iter().map(|&tm| time_integral_identity(&data.ut, 1.0, tm, 1.0 / 64.0)).collect();
    for r in &rows {
        assert!(r.sup_residual <= r.tail_bound, "{r:?}");
    }
    assert!(rows[2].sup_residual < rows[0].sup_residual);
}
