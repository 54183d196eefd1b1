//! Energies on slanted slices t = v x1 against the flat energy.

use wavelab::harness::ensemble::{member, DataFamily};
use wavelab::history::{FreeSolution, History};
use wavelab::lorentz::energy_comparability_report;
use wavelab::Grid3;

fn main() -> wavelab::Result<()> {
    let grid = Grid3::new(32, 16.0)?;
    let family = DataFamily::RandomBump { radius: 0.75, power: 8, k_max: 1.5, modes: 6 };
    let free: Vec<FreeSolution> = (0..4)
        .map(|i| member(grid, family, 5, i).map(|d| FreeSolution::new(&d, (-8.0, 8.0))))
        .collect::<Result<_, _>>()?;
    let refs: Vec<&dyn History> = free.iter().map(|f| f as &dyn History).collect();
    let report = energy_comparability_report(&refs, &[0.0, 0.3, 0.6, 0.9])?;
    for row in &report.rows {
        let ratios: Vec<String> = row.report.samples.iter().map(|s| format!("{:.4}", s.ratio)).collect();
        println!("v = {:.1}  C = {:.4}  ratios = [{}]", row.v, row.constant, ratios.join(", "));
    }
    Ok(())
}
