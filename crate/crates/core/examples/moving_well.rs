//! Split-step evolution past a moving smoothed well, with the energy budget.

use wavelab::evolution::{energy_flux_series, evolve, total_energy_series, EvolveConfig};
use wavelab::harness::ensemble::{member, DataFamily};
use wavelab::potential::{PotentialModel, Trajectory};
use wavelab::Grid3;

fn main() -> wavelab::Result<()> {
    let grid = Grid3::new(32, 16.0)?;
    let data = member(grid, DataFamily::default(), 3, 0)?;
    let model = PotentialModel::smoothed_well(1.5, 1.2, 0.3)?;
    let traj = Trajectory::linear_plus_decaying(0.3, 0.1, 2.0);
    let hist = evolve(&data, &model, &traj, &EvolveConfig::new(1.0 / 32.0, 4.0).with_stride(16))?;
    let energy = total_energy_series(&hist, &model, &traj)?;
    let flux = energy_flux_series(&hist, &model, &traj)?;
    println!("t,energy,flux");
    for (e, f) in energy.iter().zip(&flux) {
        println!("{:.3},{:.8},{:.3e}", e.t, e.energy, f.flux);
    }
    Ok(())
}
