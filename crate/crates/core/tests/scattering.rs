use wavelab::evolution::{evolve, EvolveConfig};
use wavelab::grid::CauchyData;
use wavelab::harness::ensemble::{member, DataFamily};
use wavelab::history::SpaceTimeField;
use wavelab::lorentz::{BoostParams, BoostWindow};
use wavelab::potential::{PotentialModel, Trajectory};
use wavelab::scattering::{
    amplitude_ode_rhs, asymptotic_decomposition, boosted_states, discrete_modes, extract_amplitudes,
    extract_free_data, integrate_amplitude, lab_bound_mode, make_scattering_data, potential_difference,
    riesz_coefficients, stability_residual, symplectic_pairing, DiscreteModes, ScatteringOptions,
};
use wavelab::spectral_h::{bound_states, project_pc, BoundState, Hamiltonian};
use wavelab::{Grid3, ScalarField, WaveError};

fn grid() -> Grid3 {
    Grid3::new(32, 16.0).unwrap()
}

fn well() -> PotentialModel {
    PotentialModel::smoothed_well(36.0, 0.5, 0.15).unwrap()
}

fn states(model: &PotentialModel) -> Vec<BoundState> {
    bound_states(&Hamiltonian::from_model(model, &grid()), 2).unwrap()
}

fn seed(index: usize) -> CauchyData {
    member(grid(), DataFamily::RandomBump { radius: 2.0, power: 8, k_max: 1.0, modes: 4 }, 33, index).unwrap()
}

fn opts(horizon: f64) -> ScatteringOptions {
    ScatteringOptions { horizon, ..ScatteringOptions::default() }
}

fn pc_data(data: &CauchyData, st: &[BoundState]) -> CauchyData {
    CauchyData::new(project_pc(&data.u, st), project_pc(&data.ut, st)).unwrap()
}

fn discrete_pc(data: &CauchyData, modes: &DiscreteModes) -> CauchyData {
    let (p, m) = modes.coefficients(data);
    let mut out = data.clone();
    out.axpy(-p, &modes.plus);
    out.axpy(-m, &modes.minus);
    out
}

fn decaying() -> Trajectory {
    Trajectory::linear_plus_decaying(0.0, 0.1, 2.0)
}

fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.data.iter().zip(&b.data).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn riesz_block_identity() {
    let model = well();
    let st = states(&model);
    let s = &st[0];
    let plus = lab_bound_mode(s, 1.0, &BoostParams::identity(), 0.0);
    let minus = lab_bound_mode(s, -1.0, &BoostParams::identity(), 0.0);
    assert!(max_diff(&plus.u, &s.m) < 1e-14);
    for (alpha, beta) in [(1.0, 0.0), (0.0, 1.0), (0.7, -1.3), (-2.0, 0.25)] {
        let mut data = plus.scaled(alpha);
        data.axpy(beta, &minus);
        let (p, m) = riesz_coefficients(&data, s);
        assert!((p - alpha).abs() < 1e-10 && (m - beta).abs() < 1e-10, "{p} {m}");
        let mut back = plus.scaled(p);
        back.axpy(m, &minus);
        assert!(max_diff(&back.u, &data.u) < 1e-10 && max_diff(&back.ut, &data.ut) < 1e-10);
    }
}

#[test]
fn amplitudes_of_a_static_bound_state() {
    let model = well();
    let st = states(&model);
    let g = grid();
    let mut hist = SpaceTimeField::new(g, 0.0, 0.25, true).unwrap();
    for _ in 0..5 {
        hist.push(st[0].m.clone(), Some(ScalarField::zeros(g))).unwrap();
    }
    let window = BoostWindow { t_start: 0.0, dt: 0.25, count: 5, x1_half_width: g.half_length() };
    let series = extract_amplitudes(&hist, &BoostParams::identity(), &window, &st).unwrap();
    for n in 0..series.len() {
        assert!((series.a[0][n] - 1.0).abs() < 1e-12);
        assert!(series.adot[0][n].abs() < 1e-12);
        for other in &series.a[1..] {
            assert!(other[n].abs() < 1e-10);
        }
    }
    assert!(series.remainder_overlap < 1e-8);
    let late = BoostWindow { t_start: 0.5, ..window };
    assert!(matches!(extract_amplitudes(&hist, &BoostParams::identity(), &late, &st), Err(WaveError::Domain(_))));
}

#[test]
fn linear_trajectory_has_no_coupling() {
    let model = well();
    let st = states(&model);
    let g = grid();
    let boost = BoostParams::new(0.4).unwrap();
    let traj = Trajectory::linear(0.4);
    for tp in [0.0, 1.0, 2.5] {
        assert!(potential_difference(&model, &traj, &boost, &g, tp).max_abs() == 0.0);
    }
    let r = seed(0).u;
    let rhs = amplitude_ode_rhs(1.0, &[0.3], &st[..1], &model, &traj, &boost, &r);
    assert!((rhs[0] - st[0].lambda.powi(2) * 0.3).abs() < 1e-14);
    let moving =
        potential_difference(&model, &Trajectory::linear_plus_decaying(0.4, 0.1, 2.0), &boost, &g, 1.0).max_abs();
    assert!(moving > 0.0);
}

#[test]
fn single_bound_state_well() {
    let st = states(&well());
    assert_eq!(st.len(), 1);
    assert!((-st[0].lambda * 6.0f64).exp() < 1e-8);
}

#[test]
fn discrete_modes_pair_symplectically() {
    let model = well();
    let st = states(&model);
    let modes = discrete_modes(&model, &st[0], 1.0 / 64.0, 3.0).unwrap();
    assert!((modes.lambda / st[0].lambda - 1.0).abs() < 1e-3);
    let norm = symplectic_pairing(&modes.plus, &modes.minus);
    assert!((norm / (-2.0 * st[0].lambda) - 1.0).abs() < 1e-2);
    assert_eq!(modes.coefficients(&modes.plus), (1.0, 0.0));
    let (p, m) = modes.coefficients(&modes.minus);
    assert!(p.abs() < 1e-14 && (m - 1.0).abs() < 1e-14);
}

#[test]
fn stability_residual_sensitivity_and_neutral_data() {
    let model = well();
    let st = states(&model);
    let s = &st[0];
    let lam = s.lambda;
    let traj = Trajectory::stationary();
    let o = opts(4.0);
    let modes = discrete_modes(&model, s, o.dt, 3.0).unwrap();
    let base = discrete_pc(&seed(1), &modes);
    let r0 = stability_residual(&base, &model, &traj, &st, &o).unwrap();
    assert!(r0.max_residual() < 1e-8, "{}", r0.max_residual());
    let mut neutral = base.clone();
    neutral.axpy(0.5, &modes.minus);
    let rn = stability_residual(&neutral, &model, &traj, &st, &o).unwrap();
    assert!(rn.max_residual() < 1e-8, "{}", rn.max_residual());
    let continuum = lab_bound_mode(s, -1.0, &BoostParams::identity(), 0.0);
    let leaks: Vec<f64> = [1.0 / 64.0, 1.0 / 128.0]
        .iter()
        .map(|&dt| stability_residual(&continuum, &model, &traj, &st, &ScatteringOptions { dt, ..o }).unwrap().max_residual())
        .collect();
    assert!(leaks[0] < 1e-3 && (3.0..5.0).contains(&(leaks[0] / leaks[1])), "{leaks:?}");
    let eps = 1e-3;
    let mut bumped = base.clone();
    bumped.u.axpy(eps, &s.m);
    bumped.ut.axpy(eps * lam, &s.m);
    let r1 = stability_residual(&bumped, &model, &traj, &st, &o).unwrap();
    let shift = r1.states[0].residual - r0.states[0].residual;
    assert!((shift / (2.0 * eps) - 1.0).abs() < 1e-2, "shift {shift}");
    assert!((r1.states[0].integral_form - r1.states[0].initial_part).abs() < 1e-14);
    let generic = seed(2);
    let rg = stability_residual(&generic, &model, &traj, &st, &o).unwrap();
    let direct = generic.u.dot(&s.m) + generic.ut.dot(&s.m) / lam;
    assert!((rg.states[0].residual / direct - 1.0).abs() < 1e-2, "{} vs {direct}", rg.states[0].residual);
    assert!(rg.states[0].tail_warning == ((-lam * 4.0f64).exp() >= 1e-8));
}

#[test]
fn amplitude_ode_reproduces_extraction() {
    let model = well();
    let st = states(&model);
    let lam = st[0].lambda;
    let o = ScatteringOptions { dt: 1.0 / 256.0, ..opts(3.0) };
    let report = stability_residual(&seed(3), &model, &decaying(), &st, &o).unwrap();
    let ser = &report.amplitudes;
    let forcing = &ser.forcing.as_ref().unwrap()[0];
    assert!(forcing.iter().any(|f| f.abs() > 0.0));
    let ode = integrate_amplitude(ser.a[0][0], ser.adot[0][0], lam, &ser.times, forcing);
    let scale = ser.a[0].iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let worst = ode.iter().zip(&ser.a[0]).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(worst < 1e-3 * scale, "ODE mismatch {worst} against scale {scale}");
    let rel = (report.states[0].integral_form - report.states[0].residual).abs() / report.states[0].initial_part.abs();
    assert!(rel < 1e-3, "integral form differs by {rel}");
}

#[test]
fn scattering_data_for_neutral_seed_is_unchanged() {
    let model = well();
    let st = states(&model);
    let o = opts(4.0);
    let modes = discrete_modes(&model, &st[0], o.dt, 3.0).unwrap();
    let base = discrete_pc(&seed(4), &modes);
    let out = make_scattering_data(&base, &model, &Trajectory::linear(0.0), &st, &o).unwrap();
    assert_eq!(out.residual_trace.len(), 1);
    assert!(max_diff(&out.data.u, &base.u) < 1e-8 && max_diff(&out.data.ut, &base.ut) < 1e-8);
    assert!(out.data.support_radius.is_none());
}

#[test]
fn scattering_data_decays_and_differs_in_the_bound_block() {
    let model = well();
    let st = states(&model);
    let lam = st[0].lambda;
    let raw = seed(5);
    let o = opts(4.0);
    let out = make_scattering_data(&raw, &model, &decaying(), &st, &o).unwrap();
    assert!(*out.residual_trace.last().unwrap() < 1e-6);
    let mut diff = out.data.clone();
    diff.axpy(-1.0, &raw);
    let pc = pc_data(&diff, &st[..1]);
    assert!(pc.u.max_abs() < 1e-12 && pc.ut.max_abs() < 1e-12);
    let ser = &out.report.amplitudes;
    let slope = ser.log_slope(0, (0.5, 1.0));
    assert!((slope / -lam - 1.0).abs() < 0.05, "decay slope {slope} vs {lam}");
    let growth = stability_residual(&raw, &model, &decaying(), &st, &o).unwrap().amplitudes.log_slope(0, (2.0, 4.0));
    assert!((growth / lam - 1.0).abs() < 0.02, "growth slope {growth} vs {lam}");
}

#[test]
fn stability_matches_growth_rate_on_seeds() {
    let model = well();
    let st = states(&model);
    let lam = st[0].lambda;
    let o = opts(4.0);
    for index in 0..10 {
        let raw = seed(10 + index);
        let grown = stability_residual(&raw, &model, &decaying(), &st, &o).unwrap();
        assert!(grown.max_residual() > 1e-6);
        assert!(grown.amplitudes.log_slope(0, (2.0, 4.0)) > 0.5 * lam);
        let fixed = make_scattering_data(&raw, &model, &decaying(), &st, &o).unwrap();
        assert!(fixed.report.max_residual() < 1e-6);
        assert!(fixed.report.amplitudes.pb_log_slope((0.5, 1.0)) < 0.0);
    }
}

#[test]
fn free_data_is_identity_without_potential() {
    let data = seed(6);
    let hist = evolve(&data, &PotentialModel::zero(), &Trajectory::stationary(), &EvolveConfig::new(0.125, 3.0)).unwrap();
    let out = extract_free_data(&hist, &PotentialModel::zero(), &Trajectory::stationary()).unwrap();
    assert!(max_diff(&out.free_data.u, &data.u) < 1e-10 && max_diff(&out.free_data.ut, &data.ut) < 1e-10);
    assert!(out.remainder.iter().all(|r| *r == 0.0));
    assert!(out.decreasing_final_third);
}

#[test]
fn free_data_shift_is_linear_in_weak_coupling() {
    let data = seed(7);
    let traj = Trajectory::linear(0.3);
    let cfg = EvolveConfig::new(1.0 / 32.0, 3.0).with_stride(4);
    let shifts: Vec<f64> = [0.01, 0.02]
        .iter()
        .map(|&depth| {
            let model = PotentialModel::smoothed_well(depth, 1.5, 0.2).unwrap();
            let hist = evolve(&data, &model, &traj, &cfg).unwrap();
            let mut d = extract_free_data(&hist, &model, &traj).unwrap().free_data;
            d.axpy(-1.0, &data);
            d.energy_norm()
        })
        .collect();
    let ratio = shifts[1] / shifts[0];
    assert!((ratio - 2.0).abs() < 0.02, "ratio {ratio}");
}

#[test]
fn decomposition_coefficients_and_rejection() {
    let model = well();
    let st = states(&model);
    let traj = Trajectory::stationary();
    let dt = 1.0 / 64.0;
    let modes = vec![discrete_modes(&model, &st[0], dt, 3.0).unwrap()];
    let cfg = EvolveConfig::new(dt, 3.0).with_stride(16);
    let pc = pc_data(&seed(8), &st);
    let hist = evolve(&pc, &model, &traj, &cfg).unwrap();
    let free = extract_free_data(&hist, &model, &traj).unwrap().free_data;
    let dec = asymptotic_decomposition(&hist, &traj, &st, &free, Some(&modes)).unwrap();
    for c in &dec.coefficients {
        assert!(c.growing.abs() < 1e-6 && c.decaying.abs() < 1e-6);
    }
    let minus = lab_bound_mode(&st[0], -1.0, &BoostParams::identity(), 0.0);
    let hist = evolve(&minus, &model, &traj, &cfg).unwrap();
    let zero = CauchyData::zeros(grid());
    let dec = asymptotic_decomposition(&hist, &traj, &st, &zero, Some(&modes)).unwrap();
    let c = dec.coefficients[0];
    assert!(c.growing.abs() < 1e-6 && (c.decaying - 1.0).abs() < 1e-10);
    let (dp, dm) = c.discrete.unwrap();
    assert!(dp.abs() < 1e-3 && (dm - 1.0).abs() < 1e-2, "{dp} {dm}");
    assert!(dec.remainder.iter().all(|r| *r < 1e-2), "{:?}", dec.remainder);
    let continuum = asymptotic_decomposition(&hist, &traj, &st, &zero, None).unwrap();
    assert!(continuum.remainder.last().unwrap() > dec.remainder.last().unwrap());
    assert!(matches!(asymptotic_decomposition(&hist, &decaying(), &st, &free, None), Err(WaveError::Config(_))));
    assert!(matches!(
        asymptotic_decomposition(&hist, &Trajectory::linear(0.2), &st, &free, Some(&modes)),
        Err(WaveError::Config(_))
    ));
}

#[test]
fn boosted_growing_mode_grows_at_its_rate() {
    let model = well();
    let traj = Trajectory::linear(0.3);
    let st = boosted_states(&model, &traj, &grid(), 1).unwrap();
    let lam = st[0].lambda;
    let data = lab_bound_mode(&st[0], 1.0, &BoostParams::new(0.3).unwrap(), 0.0);
    let o = ScatteringOptions { horizon: 1.0, snapshot_stride: 4, boost_half_width: Some(3.0), ..ScatteringOptions::default() };
    let report = stability_residual(&data, &model, &traj, &st, &o).unwrap();
    let ser = &report.amplitudes;
    assert!((ser.a[0][0] - 1.0).abs() < 1e-2, "{}", ser.a[0][0]);
    let slope = ser.log_slope(0, (0.0, 1.0));
    assert!((slope / lam - 1.0).abs() < 1e-2, "slope {slope} vs {lam}");
    assert!(ser.forcing.as_ref().unwrap()[0].iter().all(|f| *f == 0.0));
}
