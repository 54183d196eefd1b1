//! Windowed Picard iteration of the Duhamel equation against the split-step scheme.

use wavelab::evolution::{evolve, picard_solve, EvolveConfig, PicardOptions};
use wavelab::harness::ensemble::{member, DataFamily};
use wavelab::potential::{PotentialModel, Trajectory};
use wavelab::Grid3;

fn main() -> wavelab::Result<()> {
    let grid = Grid3::new(16, 16.0)?;
    let data = member(grid, DataFamily::default(), 0, 0)?;
    let model = PotentialModel::smoothed_well(2.0, 1.2, 0.3)?;
    let traj = Trajectory::linear(0.3);
    let opts = PicardOptions { dt: 1e-3, snapshot_stride: 50, ..PicardOptions::default() };
    let sol = picard_solve(&data, &model, &traj, 1.0, &opts)?;
    println!("window {:.4}  T_window sup|V| = {:.4}", sol.window_length, sol.window_size_product);
    for w in &sol.windows {
        println!("[{:.3}, {:.3}]  iterations {}  max ratio {:.3e}", w.start, w.end, w.iterations, w.max_ratio());
    }
    let strang = evolve(&data, &model, &traj, &EvolveConfig::new(opts.dt, 1.0).with_stride(50))?;
    let mut diff = 0.0f64;
    for n in 0..strang.len().min(sol.history.len()) {
        let (a, b) = (strang.snapshot_u(n), sol.history.snapshot_u(n));
        diff = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).fold(diff, f64::max);
    }
    println!("sup |strang - picard| = {diff:.2e}");
    Ok(())
}
