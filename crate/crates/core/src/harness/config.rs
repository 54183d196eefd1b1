//! Experiment configuration and the hypothesis ledger.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, WaveError};
use crate::grid::Grid3;
use crate::harness::ensemble::DataFamily;
use crate::norms::Hypothesis;
use crate::potential::{admissibility_check, PotentialKind, PotentialModel, Trajectory, TrajectoryKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub n: usize,
    pub length: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams { n: 64, length: 16.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataParams {
    pub family: DataFamily,
    pub ensemble: usize,
    pub seed: u64,
    /// Multiple of the normalized ground state of the potential added to the position.
    pub bound_mixture: f64,
}

impl Default for DataParams {
    fn default() -> Self {
        DataParams { family: DataFamily::default(), ensemble: 20, seed: 0, bound_mixture: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeParams {
    pub dt: f64,
    pub horizon: f64,
    /// Steps between stored snapshots.
    pub stride: usize,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams { dt: 1.0 / 64.0, horizon: 6.0, stride: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputParams {
    pub dir: Option<PathBuf>,
    /// Write the first ensemble member's data and final state as field files.
    pub snapshots: bool,
}

/// Estimates a run can evaluate, named by what they measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimate {
    /// Free energy drift of the spectral propagator.
    FreeEnergyConservation,
    /// `t sup|u(t)|` against the `Ẇ^{1,1}` data norm for free waves.
    DispersiveDecay,
    /// Free reversed endpoint norm along the configured trajectory.
    FreeReversedEndpoint,
    /// Slanted over flat energies of free waves.
    EnergyComparability,
    /// Reversed endpoint norm of the perturbed evolution.
    PerturbedReversedEndpoint,
    /// Weighted local energy of the perturbed evolution.
    LocalEnergyDecay,
    /// Sup of the total energy and its variation for the perturbed evolution.
    TotalEnergyBound,
    /// Stability residual and amplitude slopes of constructed scattering data.
    ScatteringAmplitudes,
}

impl Estimate {
    pub fn id(&self) -> &'static str {
        match self {
            Estimate::FreeEnergyConservation => "free_energy_conservation",
            Estimate::DispersiveDecay => "dispersive_decay",
            Estimate::FreeReversedEndpoint => "free_reversed_endpoint",
            Estimate::EnergyComparability => "energy_comparability",
            Estimate::PerturbedReversedEndpoint => "perturbed_reversed_endpoint",
            Estimate::LocalEnergyDecay => "local_energy_decay",
            Estimate::TotalEnergyBound => "total_energy_bound",
            Estimate::ScatteringAmplitudes => "scattering_amplitudes",
        }
    }

    pub fn uses_potential(&self) -> bool {
        matches!(
            self,
            Estimate::PerturbedReversedEndpoint
                | Estimate::LocalEnergyDecay
                | Estimate::TotalEnergyBound
                | Estimate::ScatteringAmplitudes
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default = "zero_potential")]
    pub potential: PotentialKind,
    #[serde(default = "stationary")]
    pub trajectory: TrajectoryKind,
    #[serde(default)]
    pub data: DataParams,
    #[serde(default)]
    pub scheme: SchemeParams,
    #[serde(default)]
    pub estimates: Vec<Estimate>,
    #[serde(default)]
    pub output: OutputParams,
}

fn zero_potential() -> PotentialKind {
    PotentialKind::Zero
}

fn stationary() -> TrajectoryKind {
    TrajectoryKind::Stationary
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            grid: GridParams::default(),
            potential: PotentialKind::Zero,
            trajectory: TrajectoryKind::Stationary,
            data: DataParams::default(),
            scheme: SchemeParams::default(),
            estimates: Vec::new(),
            output: OutputParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| WaveError::config(format!("invalid config: {e}")))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| WaveError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical JSON: struct fields in declaration order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON with the output section cleared, so
    /// the same experiment written to two places shares one hash.
    pub fn hash(&self) -> String {
        let physics = ExperimentConfig { output: OutputParams::default(), ..self.clone() };
        let digest = Sha256::digest(physics.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> Result<Grid3> {
        Grid3::new(self.grid.n, self.grid.length)
    }

    pub fn model(&self) -> Result<PotentialModel> {
        PotentialModel::new(self.potential)
    }

    pub fn trajectory(&self) -> Trajectory {
        Trajectory::new(self.trajectory)
    }

    /// Scheme and ensemble sanity, independent of the estimates.
    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.model()?;
        let s = &self.scheme;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(WaveError::config(format!("time step must be positive, got {}", s.dt)));
        }
        if !(s.horizon > 0.0 && s.horizon.is_finite()) {
            return Err(WaveError::config(format!("horizon must be positive, got {}", s.horizon)));
        }
        let steps = s.horizon / s.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(WaveError::config("horizon must be a whole number of steps"));
        }
        if s.stride == 0 || (steps.round() as usize) % s.stride != 0 {
            return Err(WaveError::config("stride must divide the step count"));
        }
        if self.data.ensemble == 0 {
            return Err(WaveError::config("ensemble size must be at least 1"));
        }
        Ok(())
    }

    /// Hypotheses required by each selected estimate, evaluated on this config.
    pub fn hypothesis_ledger(&self) -> Result<Vec<(Estimate, Hypothesis)>> {
        let model = self.model()?;
        let traj = self.trajectory();
        let horizon = self.scheme.horizon;
        let mut out = Vec::new();
        for &est in &self.estimates {
            if est.uses_potential() {
                let adm = admissibility_check(&traj, (0.0, horizon.max(1.0)));
                out.push((
                    est,
                    Hypothesis {
                        name: "admissible_trajectory".into(),
                        satisfied: adm.is_ok(),
                        detail: match adm {
                            Ok(r) => format!("speed bound {:.4}", r.speed_bound),
                            Err(e) => e.to_string(),
                        },
                    },
                ));
            }
            match est {
                Estimate::PerturbedReversedEndpoint | Estimate::LocalEnergyDecay => {
                    out.push((est, decay_hypothesis(&model)));
                }
                Estimate::TotalEnergyBound => {
                    out.push((est, decay_hypothesis(&model)));
                    out.push((
                        est,
                        Hypothesis {
                            name: "finite_gradient_l1".into(),
                            satisfied: model.grad_l1.is_finite(),
                            detail: format!("grad L1 norm {}", model.grad_l1),
                        },
                    ));
                }
                Estimate::ScatteringAmplitudes => {
                    out.push((est, decay_hypothesis(&model)));
                    let beta = traj.decay_beta();
                    out.push((
                        est,
                        Hypothesis {
                            name: "trajectory_decay_beta_above_one".into(),
                            satisfied: beta > 1.0,
                            detail: format!("beta {beta}"),
                        },
                    ));
                    out.push((
                        est,
                        Hypothesis {
                            name: "nonzero_potential".into(),
                            satisfied: !model.is_zero(),
                            detail: String::new(),
                        },
                    ));
                }
                _ => {}
            }
        }
        Ok(out)
    }

    /// Rejects configs that select an estimate whose hypotheses fail.
    pub fn check_ledger(&self) -> Result<Vec<(Estimate, Hypothesis)>> {
        let ledger = self.hypothesis_ledger()?;
        let failed: Vec<String> = ledger
            .iter()
            .filter(|(_, h)| !h.satisfied)
            .map(|(e, h)| format!("{} requires {} ({})", e.id(), h.name, h.detail))
            .collect();
        if !failed.is_empty() {
            return Err(WaveError::config(format!("hypothesis ledger violated: {}", failed.join("; "))));
        }
        Ok(ledger)
    }
}

fn decay_hypothesis(model: &PotentialModel) -> Hypothesis {
    Hypothesis {
        name: "potential_decay_alpha_above_three".into(),
        satisfied: model.decay_alpha > 3.0,
        detail: format!("alpha {}", model.decay_alpha),
    }
}
