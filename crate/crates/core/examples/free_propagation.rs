//! Exact spectral propagation of a random bump compared with Kirchhoff's formula.

use wavelab::free_prop::{propagate_free, KirchhoffEvaluator};
use wavelab::harness::ensemble::{member, DataFamily};
use wavelab::Grid3;

fn main() -> wavelab::Result<()> {
    let grid = Grid3::new(64, 16.0)?;
    let data = member(grid, DataFamily::default(), 7, 0)?;
    let kirchhoff = KirchhoffEvaluator::new(&data, 2, 3)?;
    for t in [1.0, 2.5, 4.0] {
        let exact = propagate_free(&data, t)?;
        let mut worst = 0.0f64;
        for (i, j, k) in [(32, 32, 32), (36, 30, 33), (28, 35, 31), (40, 32, 26)] {
            let idx = grid.index(i, j, k);
            let v = kirchhoff.eval(grid.point(idx), t)?;
            worst = worst.max((v.value - exact.u.data[idx]).abs());
        }
        println!(
            "t = {t:.1}  max |kirchhoff - spectral| = {worst:.2e}  energy drift = {:.2e}",
            (exact.free_energy() - data.free_energy()).abs() / data.free_energy()
        );
    }
    Ok(())
}
