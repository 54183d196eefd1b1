//! Sharp support of free waves from a compact bump.

use wavelab::free_prop::propagate_free;
use wavelab::harness::ensemble::{member, DataFamily};
use wavelab::Grid3;

fn main() -> wavelab::Result<()> {
    let grid = Grid3::new(64, 16.0)?;
    let r = 3.5;
    let data = member(grid, DataFamily::VelocityBump { radius: r, power: 24 }, 0, 0)?;
    for t in [1.5, 3.0, 4.5] {
        let u = propagate_free(&data, t)?.u;
        let (mut inside, mut outside) = (0.0f64, 0.0f64);
        for idx in 0..grid.len() {
            let p = grid.point(idx);
            let rho = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if rho <= t - r || rho >= t + r {
                outside = outside.max(u.data[idx].abs());
            } else {
                inside = inside.max(u.data[idx].abs());
            }
        }
        println!("t = {t:.1}  shell peak = {inside:.4e}  outside shell = {outside:.2e}");
    }
    Ok(())
}
