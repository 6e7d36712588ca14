//! Draws of the Gaussian field: nominal, pinned and excursion-tilted.
//! Writes `x,xi` CSVs to the current directory.

use std::fs::File;

use straintail::field::{FieldSampler, Grid, TiltRegion};
use straintail::StationaryKernel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kernel = StationaryKernel::squared_exponential(0.2)?;
    let grid = Grid::uniform(1.0, 256)?;
    let sampler = FieldSampler::new(&kernel, grid.clone())?;
    println!("factor rank {} on {} nodes", sampler.rank(), grid.len());

    let plain = sampler.sample_path(1);
    plain.write_csv(File::create("path_direct.csv")?)?;

    // force a peak of height 3 in the middle
    let pinned = sampler.sample_conditional(&[(0.5, 3.0)], 2)?;
    pinned.write_csv(File::create("path_pinned.csv")?)?;

    // uniform peak location, peak height above 2.5
    let region = TiltRegion::new(&grid, (0.0, 1.0))?;
    let tilted = sampler.sample_excursion_tilted(&region, 2.5, 3)?;
    tilted.write_csv(File::create("path_tilted.csv")?)?;

    for (name, p) in [("direct", &plain), ("pinned", &pinned), ("tilted", &tilted)] {
        let max = p.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("{name:<7} max xi {max:>7.3}  log dP/dQ {:>8.4}", p.log_likelihood_ratio);
    }
    Ok(())
}
