use std::path::PathBuf;

use wavelab::harness::config::{DataParams, GridParams, SchemeParams};
use wavelab::harness::ensemble::{data_norm, ensemble, member, DataFamily};
use wavelab::harness::run::par_map;
use wavelab::harness::{run, Estimate, ExperimentConfig};
use wavelab::potential::{PotentialKind, TrajectoryKind};
use wavelab::{Grid3, WaveError};

fn small(estimates: Vec<Estimate>) -> ExperimentConfig {
    ExperimentConfig {
        grid: GridParams { n: 16, length: 16.0 },
        data: DataParams {
            family: DataFamily::RandomBump { radius: 2.0, power: 8, k_max: 1.0, modes: 4 },
            ensemble: 2,
            seed: 5,
            bound_mixture: 0.0,
        },
        scheme: SchemeParams { dt: 1.0 / 16.0, horizon: 1.0, stride: 4 },
        estimates,
        ..ExperimentConfig::default()
    }
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wavelab-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn empty_estimate_list_echoes_config_and_grid() {
    let cfg = small(Vec::new());
    let report = run(&cfg).unwrap();
    assert!(report.members.is_empty() && report.estimates.is_empty());
    assert!(report.passed);
    assert_eq!(report.config, cfg);
    assert_eq!(report.config_hash, cfg.hash());
    assert_eq!(report.seed, 5);
    assert_eq!(report.grid.n, 16);
    assert!((report.grid.spacing - 1.0).abs() < 1e-15);
    assert!((report.grid.causality_radius - 7.0).abs() < 1e-15);
}

#[test]
fn config_json_defaults_and_rejections() {
    let cfg = ExperimentConfig::from_json("{}").unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
    assert_eq!(cfg.grid.n, 64);
    assert_eq!(cfg.data.ensemble, 20);
    let text = r#"{"grid": {"n": 16, "length": 8.0}, "potential": {"kind": "smoothed_well", "depth": 2.0, "radius": 1.0, "smoothing": 0.2},
        "trajectory": {"kind": "linear", "mu": [0.3, 0.0, 0.0]}, "estimates": ["total_energy_bound"]}"#;
    let parsed = ExperimentConfig::from_json(text).unwrap();
    assert_eq!(parsed.estimates, vec![Estimate::TotalEnergyBound]);
    assert_eq!(ExperimentConfig::from_json(&parsed.canonical_json()).unwrap(), parsed);
    assert!(matches!(ExperimentConfig::from_json(r#"{"grid": {"n": 16, "length": 8.0, "h": 1}}"#), Err(WaveError::Config(_))));
    let mut bad = small(Vec::new());
    bad.scheme.stride = 3;
    assert!(matches!(run(&bad), Err(e) if e.is_config() && e.stage == "config" && e.exit_code() == 2));
}

#[test]
fn hash_tracks_every_field() {
    let a = small(vec![Estimate::FreeEnergyConservation]);
    let mut b = a.clone();
    assert_eq!(a.hash(), b.hash());
    b.data.seed = 6;
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn fixed_seed_gives_identical_files() {
    let mut cfg = small(vec![Estimate::FreeEnergyConservation, Estimate::FreeReversedEndpoint, Estimate::DispersiveDecay]);
    let (d1, d2) = (scratch_dir("a"), scratch_dir("b"));
    cfg.output.dir = Some(d1.clone());
    cfg.output.snapshots = true;
    let r1 = run(&cfg).unwrap();
    cfg.output.dir = Some(d2.clone());
    let r2 = run(&cfg).unwrap();
    assert!(r1.passed && r2.passed);
    for file in ["samples.csv", "member0.wvf"] {
        assert_eq!(std::fs::read(d1.join(file)).unwrap(), std::fs::read(d2.join(file)).unwrap(), "{file}");
    }
    let csv = std::fs::read_to_string(d1.join("samples.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d1.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["config_hash"], serde_json::Value::String(cfg.hash()));
    assert_eq!(json["seed"], 5);
    cfg.data.seed = 9;
    cfg.output.dir = None;
    let r3 = run(&cfg).unwrap();
    assert_ne!(r3.samples_csv(), r1.samples_csv());
    let _ = std::fs::remove_dir_all(&d1);
    let _ = std::fs::remove_dir_all(&d2);
}

#[test]
fn ledger_violations_are_config_errors() {
    let mut cfg = small(vec![Estimate::TotalEnergyBound]);
    cfg.potential = PotentialKind::SphericalWell { depth: 2.0, radius: 1.0 };
    let err = run(&cfg).unwrap_err();
    assert!(err.is_config() && err.stage == "ledger", "{err}");
    assert!(err.to_string().contains("finite_gradient_l1"));

    let mut cfg = small(vec![Estimate::ScatteringAmplitudes]);
    cfg.potential = PotentialKind::SmoothedWell { depth: 36.0, radius: 0.5, smoothing: 0.15 };
    cfg.trajectory = TrajectoryKind::SmoothedPiecewise { v_in: [0.0; 3], v_out: [0.2, 0.0, 0.0], t_switch: 0.5, width: 0.2 };
    assert!(run(&cfg).unwrap_err().to_string().contains("trajectory_decay_beta_above_one"));

    let mut cfg = small(vec![Estimate::LocalEnergyDecay]);
    cfg.potential = PotentialKind::SmoothedWell { depth: 1.0, radius: 1.0, smoothing: 0.2 };
    cfg.trajectory = TrajectoryKind::Linear { mu: [1.2, 0.0, 0.0] };
    assert!(run(&cfg).unwrap_err().to_string().contains("admissible_trajectory"));

    let mut cfg = small(vec![Estimate::ScatteringAmplitudes]);
    cfg.trajectory = TrajectoryKind::Stationary;
    assert!(run(&cfg).unwrap_err().to_string().contains("nonzero_potential"));

    let ok = small(vec![Estimate::FreeEnergyConservation]);
    assert!(ok.check_ledger().unwrap().is_empty());
}

#[test]
fn module_errors_name_the_stage() {
    let mut cfg = small(vec![Estimate::PerturbedReversedEndpoint]);
    cfg.potential = PotentialKind::SmoothedWell { depth: 1.0, radius: 1.0, smoothing: 0.2 };
    cfg.scheme.horizon = 7.0;
    let err = run(&cfg).unwrap_err();
    assert_eq!(err.stage, "perturbed evolution");
    assert!(err.is_config(), "{err}");
}

#[test]
fn perturbed_estimates_report_per_member() {
    let mut cfg = small(vec![Estimate::PerturbedReversedEndpoint, Estimate::LocalEnergyDecay, Estimate::TotalEnergyBound]);
    cfg.potential = PotentialKind::SmoothedWell { depth: 1.5, radius: 1.2, smoothing: 0.3 };
    cfg.trajectory = TrajectoryKind::LinearPlusDecaying { mu: [0.3, 0.0, 0.0], epsilon: 0.1, beta: 2.0 };
    let report = run(&cfg).unwrap();
    assert!(report.passed);
    assert_eq!(report.estimates.len(), 3);
    for e in &report.estimates {
        assert_eq!(e.reports[0].samples.len(), 2);
        assert!(e.reports[0].max_ratio > 0.0 && e.reports[0].max_ratio.is_finite(), "{}", e.estimate);
    }
    assert_eq!(report.ledger.len(), 7);
    assert!(report.ledger.iter().all(|l| l.hypothesis.satisfied));
}

#[test]
fn bound_mixture_adds_the_ground_state() {
    let mut cfg = small(vec![Estimate::FreeEnergyConservation]);
    cfg.grid.n = 32;
    cfg.potential = PotentialKind::SmoothedWell { depth: 36.0, radius: 0.5, smoothing: 0.15 };
    let plain = run(&cfg).unwrap();
    cfg.data.bound_mixture = 0.5;
    let mixed = run(&cfg).unwrap();
    assert!(mixed.members[0].data_norm > plain.members[0].data_norm);
    assert!(mixed.members[0].support_radius.is_none());
}

#[test]
fn par_map_keeps_index_order() {
    let out = par_map(17, |i| Ok(i * i)).unwrap();
    assert_eq!(out, (0..17).map(|i| i * i).collect::<Vec<_>>());
    assert!(matches!(par_map(3, |i| if i == 1 { Err(WaveError::config("x")) } else { Ok(i) }), Err(WaveError::Config(_))));
}

#[test]
fn single_gaussian_member_is_the_fixed_gaussian() {
    let g = Grid3::new(16, 8.0).unwrap();
    let fam = DataFamily::Gaussian { sigma: 1.0, amplitude: 2.0 };
    let e = ensemble(g, fam, 1, 99).unwrap();
    assert_eq!(e.len(), 1);
    let expect = |x: [f64; 3]| 2.0 * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp();
    for idx in 0..g.len() {
        assert!((e[0].u.data[idx] - expect(g.point(idx))).abs() < 1e-15);
        assert_eq!(e[0].ut.data[idx], 0.0);
    }
    assert!(matches!(ensemble(g, fam, 0, 1), Err(WaveError::Config(_))));
}

#[test]
fn seeds_give_distinct_members_with_compact_support() {
    let g = Grid3::new(32, 16.0).unwrap();
    let fam = DataFamily::default();
    let a = member(g, fam, 1, 0).unwrap();
    let b = member(g, fam, 2, 0).unwrap();
    assert!(a.u.data.iter().zip(&b.u.data).any(|(x, y)| (x - y).abs() > 1e-3));
    assert!(data_norm(&a) > 0.0 && data_norm(&b) > 0.0);
    for d in [&a, &b] {
        let r = d.support_radius.unwrap();
        for idx in 0..g.len() {
            let p = g.point(idx);
            if (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() >= r {
                assert!(d.u.data[idx].abs() < 1e-12 && d.ut.data[idx].abs() < 1e-12);
            }
        }
    }
}
