use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use wavelab::evolution::{evolve, total_energy_series, EvolveConfig};
use wavelab::free_prop::propagate_free;
use wavelab::harness::ensemble::{data_norm, member};
use wavelab::harness::suite::{run_criterion, summary_table, SuiteOptions, CRITERIA};
use wavelab::harness::{run, ExperimentConfig, RunError};
use wavelab::history::{FreeSolution, History};
use wavelab::io::write_fields;
use wavelab::lorentz::energy_comparability_report;
use wavelab::scattering::{boosted_states, scattering_diagnostics, ScatteringOptions};
use wavelab::WaveError;

#[derive(Parser)]
#[command(name = "wavelab", version, about = "Wave equations with moving potentials on a periodic box")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// JSON experiment config; defaults apply to omitted fields.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Ensemble member to use.
    #[arg(long, default_value_t = 0)]
    member: usize,
}

impl ConfigArg {
    fn load(&self) -> Result<ExperimentConfig, WaveError> {
        let cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Exact free propagation of one ensemble member.
    Propagate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        time: f64,
        /// Write `u` and `u_t` at the final time.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bound states of the potential contracted by the trajectory speed.
    Eigens {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 2)]
        count: usize,
    },
    /// Split-step evolution with the configured potential and trajectory.
    Evolve {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Slanted over flat free energies of the ensemble.
    BoostEnergy {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_delimiter = ',', default_value = "0,0.3,0.6,0.9")]
        speeds: Vec<f64>,
    },
    /// Scattering data, stability residual and free asymptotic data.
    Scattering {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Configured run with the hypothesis ledger and report files.
    VerifyEstimate {
        #[arg(long, short)]
        config: PathBuf,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Acceptance criteria at desk scale.
    Suite {
        /// Criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        ensemble: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

enum Failure {
    Checks,
    Error(RunError),
}

impl From<WaveError> for Failure {
    fn from(source: WaveError) -> Self {
        Failure::Error(RunError { stage: "command".into(), source })
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Error(e)
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value"));
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Propagate { config, time, out } => {
            let cfg = config.load()?;
            let data = member(cfg.grid()?, cfg.data.family, cfg.data.seed, config.member)?;
            let end = propagate_free(&data, time)?;
            print_json(&json!({
                "config_hash": cfg.hash(),
                "seed": cfg.data.seed,
                "time": time,
                "sup_u": end.u.max_abs(),
                "free_energy": end.free_energy(),
                "initial_free_energy": data.free_energy(),
            }));
            if let Some(p) = out {
                write_fields(p, &[&end.u, &end.ut])?;
            }
        }
        Command::Eigens { config, count } => {
            let cfg = config.load()?;
            let states = boosted_states(&cfg.model()?, &cfg.trajectory(), &cfg.grid()?, count)?;
            let rows: Vec<_> = states
                .iter()
                .map(|s| json!({"eigenvalue": s.eigenvalue, "lambda": s.lambda, "residual": s.residual}))
                .collect();
            print_json(&json!({"config_hash": cfg.hash(), "states": rows}));
        }
        Command::Evolve { config, out } => {
            let cfg = config.load()?;
            let (model, traj) = (cfg.model()?, cfg.trajectory());
            let data = member(cfg.grid()?, cfg.data.family, cfg.data.seed, config.member)?;
            let ecfg = EvolveConfig::new(cfg.scheme.dt, cfg.scheme.horizon).with_stride(cfg.scheme.stride);
            let hist = evolve(&data, &model, &traj, &ecfg)?;
            println!("t,energy");
            for s in total_energy_series(&hist, &model, &traj)? {
                println!("{},{}", s.t, s.energy);
            }
            if let Some(p) = out {
                let last = hist.snapshot(hist.len() - 1)?;
                write_fields(p, &[&last.u, &last.ut])?;
            }
        }
        Command::BoostEnergy { config, speeds } => {
            let cfg = config.load()?;
            let grid = cfg.grid()?;
            let half = grid.half_length();
            let free: Vec<FreeSolution> = (0..cfg.data.ensemble)
                .map(|i| member(grid, cfg.data.family, cfg.data.seed, i).map(|d| FreeSolution::new(&d, (-half, half))))
                .collect::<Result<_, _>>()?;
            let refs: Vec<&dyn History> = free.iter().map(|f| f as &dyn History).collect();
            let rep = energy_comparability_report(&refs, &speeds)?;
            print_json(&json!({"config_hash": cfg.hash(), "report": rep}));
        }
        Command::Scattering { config } => {
            let cfg = config.load()?;
            let (model, traj, grid) = (cfg.model()?, cfg.trajectory(), cfg.grid()?);
            let states = boosted_states(&model, &traj, &grid, 1)?;
            let seed = member(grid, cfg.data.family, cfg.data.seed, config.member)?;
            let opts = ScatteringOptions {
                dt: cfg.scheme.dt,
                horizon: cfg.scheme.horizon,
                snapshot_stride: cfg.scheme.stride,
                ..ScatteringOptions::default()
            };
            let (built, diag) = scattering_diagnostics(&seed, &model, &traj, &states, &opts)?;
            print_json(&json!({
                "config_hash": cfg.hash(),
                "lambda": states.iter().map(|s| s.lambda).collect::<Vec<_>>(),
                "seed_data_norm": data_norm(&seed),
                "data_norm": data_norm(&built.data),
                "diagnostics": diag,
            }));
        }
        Command::VerifyEstimate { config, out } => {
            let mut cfg = ExperimentConfig::load(&config).map_err(|source| RunError { stage: "config".into(), source })?;
            if out.is_some() {
                cfg.output.dir = out;
            }
            let report = run(&cfg)?;
            println!("{}", report.to_json());
            if !report.passed {
                return Err(Failure::Checks);
            }
        }
        Command::Suite { only, n, ensemble, seed } => {
            let opts = SuiteOptions { n, ensemble, seed, ..SuiteOptions::default() };
            let ids: Vec<usize> = if only.is_empty() { (1..=CRITERIA.len()).collect() } else { only };
            let mut results = Vec::with_capacity(ids.len());
            for id in ids {
                let start = Instant::now();
                let r = run_criterion(id, &opts);
                match &r {
                    Ok(o) => println!("{}  [{:.1?}]", o.line(), start.elapsed()),
                    Err(e) => println!("ERROR {id:>2} {e}"),
                }
                results.push((id, r));
            }
            println!("\n{}", summary_table(&results));
            if let Some((_, Err(e))) = results.iter().find(|(_, r)| matches!(r, Err(WaveError::Config(_)))) {
                return Err(Failure::Error(RunError { stage: "suite".into(), source: WaveError::config(e.to_string()) }));
            }
            if !results.iter().all(|(_, r)| r.as_ref().is_ok_and(|o| o.passed())) {
                return Err(Failure::Checks);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
