//! Reversed endpoint norm of free waves along linear trajectories.

use wavelab::harness::ensemble::{data_norm, member, DataFamily};
use wavelab::history::FreeFrames;
use wavelab::norms::reversed_norm_comoving;
use wavelab::potential::Trajectory;
use wavelab::Grid3;

fn main() -> wavelab::Result<()> {
    let grid = Grid3::new(32, 16.0)?;
    for ell in [0.0, 0.3, 0.6] {
        let traj = Trajectory::linear(ell);
        let mut worst = 0.0f64;
        for index in 0..4 {
            let data = member(grid, DataFamily::default(), 1, index)?;
            let frames = FreeFrames::over(&data, 6.0, 1.0 / 16.0).comoving(traj);
            let r = reversed_norm_comoving(&frames, &traj)?;
            worst = worst.max(r.value / data_norm(&data));
        }
        println!("l = {ell:.1}  max sup_x ||u(x + l t, t)||_L2(dt) / data norm = {worst:.4}");
    }
    Ok(())
}
