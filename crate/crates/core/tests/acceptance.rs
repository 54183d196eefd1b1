//! One test per acceptance criterion at desk scale; each prints a PASS/FAIL line.

use std::sync::Mutex;

use wavelab::harness::suite::{run_criterion, SuiteOptions};

static SERIAL: Mutex<()> = Mutex::new(());

fn criterion(id: usize) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let outcome = run_criterion(id, &SuiteOptions::default());
    match outcome {
        Ok(o) => {
            println!("{}", o.line());
            for c in &o.checks {
                println!("    {} {} = {:.6e} (need {})", if c.passed { "ok  " } else { "FAIL" }, c.label, c.value, c.bound);
            }
            for (label, v) in &o.records {
                println!("    note {label} = {v:.6e}");
            }
            assert!(o.passed(), "{}", o.line());
        }
        Err(e) => {
            println!("FAIL {id:>2} {e}");
            panic!("criterion {id} raised {e}");
        }
    }
}

#[test]
fn c01_propagator_cross_validation() {
    criterion(1);
}

#[test]
fn c02_strong_huygens() {
    criterion(2);
}

#[test]
fn c03_energy_conservation() {
    criterion(3);
}

#[test]
fn c04_dispersive_decay() {
    criterion(4);
}

#[test]
fn c05_free_reversed_endpoint() {
    criterion(5);
}

#[test]
fn c06_fourier_identity() {
    criterion(6);
}

#[test]
fn c07_bound_state_eigenvalue() {
    criterion(7);
}

#[test]
fn c08_lorentz_energy_comparability() {
    criterion(8);
}

#[test]
fn c09_picard_oracle() {
    criterion(9);
}

#[test]
fn c10_amplitude_dynamics() {
    criterion(10);
}

#[test]
fn c11_scattering_remainder() {
    criterion(11);
}

#[test]
fn c12_total_energy_boundedness() {
    criterion(12);
}

#[test]
fn c13_local_energy_decay() {
    criterion(13);
}

#[test]
fn c14_asymptotic_decomposition() {
    criterion(14);
}
