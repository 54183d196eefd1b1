use wavelab::evolution::{
    evolve, evolve_observed, picard_solve, shift_to_comoving, total_energy, total_energy_series, EvolveConfig,
    MovingPotential, PicardOptions, Scheme,
};
use wavelab::free_prop::propagate_free;
use wavelab::grid::CauchyData;
use wavelab::harness::ensemble::{member, DataFamily};
use wavelab::potential::{PotentialModel, Trajectory};
use wavelab::spectral_h::{bound_states, Hamiltonian};
use wavelab::{Grid3, ScalarField, WaveError};

fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.data.iter().zip(b.data.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn bump_data(n: usize, length: f64, radius: f64, index: usize) -> CauchyData {
    let g = Grid3::new(n, length).unwrap();
    member(g, DataFamily::RandomBump { radius, power: 8, k_max: 1.0, modes: 4 }, 21, index).unwrap()
}

fn end_state(data: &CauchyData, model: &PotentialModel, traj: &Trajectory, cfg: &EvolveConfig) -> CauchyData {
    evolve_observed(data, model, traj, cfg, &mut |_, _, _| Ok(())).unwrap()
}

#[test]
fn zero_potential_matches_free_propagation() {
    let data = bump_data(16, 16.0, 2.5, 0);
    let cfg = EvolveConfig::new(0.25, 2.0);
    let hist = evolve(&data, &PotentialModel::zero(), &Trajectory::stationary(), &cfg).unwrap();
    assert_eq!(hist.len(), 9);
    let exact = propagate_free(&data, 2.0).unwrap();
    let last = hist.snapshot(8).unwrap();
    assert!(max_diff(&last.u, &exact.u) < 1e-12);
    assert!(max_diff(&last.ut, &exact.ut) < 1e-12);
}

#[test]
fn configuration_errors() {
    let data = bump_data(16, 16.0, 2.5, 0);
    let model = PotentialModel::smoothed_well(1.0, 1.0, 0.2).unwrap();
    let st = Trajectory::stationary();
    let bad = [
        EvolveConfig::new(0.3, 1.0),
        EvolveConfig::new(0.0, 1.0),
        EvolveConfig::new(0.25, 1.0).with_stride(3),
        EvolveConfig::new(0.25, 6.0),
    ];
    for cfg in bad {
        assert!(matches!(evolve(&data, &model, &st, &cfg), Err(WaveError::Config(_))), "{cfg:?}");
    }
    let fast = Trajectory::linear(1.2);
    assert!(matches!(evolve(&data, &model, &fast, &EvolveConfig::new(0.25, 1.0)), Err(WaveError::Config(_))));
}

#[test]
fn backward_run_undoes_forward_run() {
    let data = bump_data(16, 16.0, 2.0, 1);
    let model = PotentialModel::smoothed_well(3.0, 1.2, 0.2).unwrap();
    let traj = Trajectory::linear(0.4);
    let fwd = end_state(&data, &model, &traj, &EvolveConfig::new(1.0 / 32.0, 1.5));
    let back = end_state(&fwd, &model, &traj, &EvolveConfig::new(1.0 / 32.0, 0.0).with_start(1.5));
    assert!(max_diff(&back.u, &data.u) < 1e-11);
    assert!(max_diff(&back.ut, &data.ut) < 1e-11);
    let hist = evolve(&fwd, &model, &traj, &EvolveConfig::new(1.0 / 32.0, 0.0).with_start(1.5).with_stride(8)).unwrap();
    assert_eq!(hist.t0(), 0.0);
    assert_eq!(hist.len(), 7);
    assert!(max_diff(hist.snapshot_u(0), &data.u) < 1e-11);
}

#[test]
fn moving_well_is_second_order() {
    let data = bump_data(32, 16.0, 2.0, 2);
    let model = PotentialModel::smoothed_well(4.0, 1.2, 0.3).unwrap();
    let traj = Trajectory::linear(0.4);
    let runs: Vec<CauchyData> = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0]
        .iter()
        .map(|&dt| end_state(&data, &model, &traj, &EvolveConfig::new(dt, 1.0)))
        .collect();
    let e1 = max_diff(&runs[0].u, &runs[1].u);
    let e2 = max_diff(&runs[1].u, &runs[2].u);
    let ratio = e1 / e2;
    assert!((ratio - 4.0).abs() < 0.4, "Richardson ratio {ratio}");
}

#[test]
fn bound_state_grows_like_cosh() {
    let g = Grid3::new(32, 16.0).unwrap();
    let model = PotentialModel::smoothed_well(12.0, 1.5, 0.2).unwrap();
    let states = bound_states(&Hamiltonian::from_model(&model, &g), 1).unwrap();
    let m = &states[0].m;
    let lambda = states[0].lambda;
    let data = CauchyData::new(m.clone(), ScalarField::zeros(g)).unwrap();
    let t_end = 1.0;
    let cfg = EvolveConfig::new(1.0 / 256.0, t_end);
    let mut worst = 0.0f64;
    evolve_observed(&data, &model, &Trajectory::stationary(), &cfg, &mut |_, t, d| {
        let a = d.u.dot(m);
        worst = worst.max((a / (lambda * t).cosh() - 1.0).abs());
        let mut rest = d.u.clone();
        rest.axpy(-a, m);
        assert!(rest.l2_norm() < 1e-3 * a.abs());
        Ok(())
    })
    .unwrap();
    assert!(worst < 1e-3, "relative amplitude error {worst}");
}

#[test]
fn stationary_energy_drift_is_second_order() {
    let data = bump_data(32, 16.0, 2.0, 3);
    let model = PotentialModel::smoothed_well(1.5, 1.2, 0.3).unwrap();
    let st = Trajectory::stationary();
    let mut drifts = Vec::new();
    for dt in [1.0 / 16.0, 1.0 / 32.0] {
        let pot = MovingPotential::new(&model, &st, data.grid()).at(0.0);
        let e0 = total_energy(&data, &pot);
        let mut worst = 0.0f64;
        evolve_observed(&data, &model, &st, &EvolveConfig::new(dt, 4.0), &mut |_, _, d| {
            worst = worst.max((total_energy(d, &pot) - e0).abs() / e0);
            Ok(())
        })
        .unwrap();
        assert!(worst < 5.0 * dt * dt, "drift {worst} at dt {dt}");
        drifts.push(worst);
    }
    let ratio = drifts[0] / drifts[1];
    assert!(ratio > 3.0 && ratio < 5.0, "drift ratio {ratio}");
}

#[test]
fn free_energy_series_is_constant() {
    let data = bump_data(16, 16.0, 2.5, 4);
    let hist = evolve(&data, &PotentialModel::zero(), &Trajectory::stationary(), &EvolveConfig::new(0.25, 3.0)).unwrap();
    let series = total_energy_series(&hist, &PotentialModel::zero(), &Trajectory::stationary()).unwrap();
    let e0 = series[0].energy;
    assert!(series.iter().all(|s| (s.energy - e0).abs() < 1e-10 * e0));
    assert!((e0 - 2.0 * data.free_energy()).abs() < 1e-12 * e0);
}

#[test]
fn picard_free_case_takes_one_iteration() {
    let data = bump_data(16, 16.0, 2.0, 5);
    let opts = PicardOptions { dt: 0.05, ..PicardOptions::default() };
    let sol = picard_solve(&data, &PotentialModel::zero(), &Trajectory::stationary(), 1.0, &opts).unwrap();
    assert_eq!(sol.windows.len(), 1);
    assert_eq!(sol.windows[0].iterations, 1);
    let exact = propagate_free(&data, 1.0).unwrap();
    assert!(max_diff(sol.history.snapshot_u(20), &exact.u) < 1e-12);
}

#[test]
fn picard_agrees_with_strang_and_contracts() {
    let data = bump_data(16, 16.0, 2.0, 6);
    let model = PotentialModel::smoothed_well(2.0, 1.2, 0.3).unwrap();
    let traj = Trajectory::linear(0.3);
    let dt = 1e-3;
    let t_total = 0.2;
    let opts = PicardOptions { dt, snapshot_stride: 50, ..PicardOptions::default() };
    let sol = picard_solve(&data, &model, &traj, t_total, &opts).unwrap();
    assert!(sol.window_size_product < 0.1);
    assert!(sol.windows.len() > 1);
    for w in &sol.windows {
        assert!(w.max_ratio() <= 0.5, "ratio {}", w.max_ratio());
    }
    let strang = evolve(&data, &model, &traj, &EvolveConfig::new(dt, t_total).with_stride(50)).unwrap();
    assert_eq!(strang.len(), sol.history.len());
    for n in 0..strang.len() {
        let d = max_diff(strang.snapshot_u(n), sol.history.snapshot_u(n));
        assert!(d < 1e-5, "snapshot {n}: {d}");
    }
    let via_cfg = evolve(
        &data,
        &model,
        &traj,
        &EvolveConfig::new(dt, t_total).with_stride(50).with_scheme(Scheme::PicardOracle),
    )
    .unwrap();
    assert!(max_diff(via_cfg.snapshot_u(4), sol.history.snapshot_u(4)) == 0.0);
}

#[test]
fn picard_rejects_step_longer_than_window() {
    let data = bump_data(16, 16.0, 2.0, 7);
    let model = PotentialModel::smoothed_well(50.0, 1.0, 0.3).unwrap();
    let opts = PicardOptions { dt: 0.01, ..PicardOptions::default() };
    assert!(matches!(
        picard_solve(&data, &model, &Trajectory::stationary(), 0.1, &opts),
        Err(WaveError::Config(_))
    ));
}

#[test]
fn comoving_shift_identities() {
    let g = Grid3::new(32, 16.0).unwrap();
    let data = member(g, DataFamily::Gaussian { sigma: 1.2, amplitude: 1.0 }, 0, 0).unwrap();
    let data = CauchyData::new(data.u, ScalarField::zeros(g)).unwrap();
    let hist =
        evolve(&data, &PotentialModel::zero(), &Trajectory::stationary(), &EvolveConfig::new(0.25, 1.0)).unwrap();
    let same = shift_to_comoving(&hist, &Trajectory::stationary()).unwrap();
    assert!(!same.wrapped);
    let compact = bump_data(32, 16.0, 3.0, 8);
    let short = evolve(&compact, &PotentialModel::zero(), &Trajectory::stationary(), &EvolveConfig::new(0.25, 1.0)).unwrap();
    assert!(!shift_to_comoving(&short, &Trajectory::linear(0.99)).unwrap().wrapped);
    for n in 0..hist.len() {
        assert_eq!(same.field.snapshot_u(n), hist.snapshot_u(n));
    }
    let traj = Trajectory::linear(0.6);
    let there = shift_to_comoving(&hist, &traj).unwrap();
    let back = shift_to_comoving(&there.field, &Trajectory::linear(-0.6)).unwrap();
    for n in 0..hist.len() {
        let d = max_diff(back.field.snapshot_u(n), hist.snapshot_u(n));
        assert!(d < 1e-10, "{n}: {d}");
    }
    let long = evolve(&data, &PotentialModel::zero(), &Trajectory::stationary(), &EvolveConfig::new(0.5, 4.5)).unwrap();
    assert!(shift_to_comoving(&long, &Trajectory::linear(0.9)).unwrap().wrapped);
}
