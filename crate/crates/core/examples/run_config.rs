//! Configured run: hypothesis ledger, per-member summaries and report files.
//!
//! Usage: `cargo run --example run_config -- [config.json]`

use wavelab::harness::{run, ExperimentConfig};

fn main() {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(path),
        None => ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/perturbed.json")),
    };
    let cfg = cfg.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        std::process::exit(2);
    });
    match run(&cfg) {
        Ok(report) => {
            for l in &report.ledger {
                println!("ledger {} {} {}", l.estimate, l.hypothesis.name, l.hypothesis.satisfied);
            }
            for e in &report.estimates {
                for c in &e.checks {
                    println!("{} {}: {} ({})", e.estimate, c.label, c.value, if c.passed { "ok" } else { "fail" });
                }
            }
            println!("passed: {}  hash {}", report.passed, report.config_hash);
            std::process::exit(report.exit_code());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
