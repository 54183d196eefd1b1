//! Bound states of a spherical well on the grid, compared with the radial root.

use std::time::Instant;

use wavelab::potential::PotentialModel;
use wavelab::radial::square_well_s_wave;
use wavelab::spectral_h::{agmon_report, bound_state_search, EigenOptions, Hamiltonian};
use wavelab::Grid3;

fn main() -> wavelab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let grid = Grid3::new(n, 16.0)?;
    let model = PotentialModel::spherical_well(4.0, 1.0)?;
    let h = Hamiltonian::from_model(&model, &grid);
    let start = Instant::now();
    let search = bound_state_search(&h, 1, &EigenOptions::default())?;
    println!("outer iterations {} in {:.1?}", search.outer_iterations, start.elapsed());
    let exact = square_well_s_wave(4.0, 1.0);
    for s in &search.states {
        let agmon = agmon_report(s, (2.0, 4.5))?;
        println!(
            "E = {:.10}  root = {:.10}  residual = {:.2e}  rate/lambda = {:.4}  weighted = {:.3}",
            s.eigenvalue,
            exact[0],
            s.residual,
            agmon.fitted_rate / s.lambda,
            agmon.weighted_ratio
        );
    }
    println!("box modes: {:?}", search.box_modes);
    Ok(())
}
