//! Strain of one random path from the closed form and from the
//! finite-volume solver, at three grid sizes.

use std::sync::Arc;

use straintail::field::{FieldSampler, Grid, PathSample};
use straintail::solver::{max_abs_strain, solution_closed_form, solve_fd_oracle};
use straintail::{ForcingKind, ForcingProfile, ProblemSpec, StationaryKernel};

fn coarsen(p: &PathSample) -> PathSample {
    PathSample {
        grid: Arc::new(p.grid.coarsen().unwrap()),
        values: p.values.iter().step_by(2).copied().collect(),
        ..p.clone()
    }
}

fn main() -> straintail::Result<()> {
    let kind = ForcingKind::GaussianBump { base: 0.2, amplitude: 1.0, center: 0.5, width: 0.15 };
    let spec =
        ProblemSpec::new(1.0, 0.5, StationaryKernel::squared_exponential(0.2)?, ForcingProfile::new(kind, 1.0)?)?;
    let sampler = FieldSampler::new(&spec.kernel, Grid::uniform(1.0, 2048)?)?;

    let mut path = sampler.sample_path(42);
    for _ in 0..3 {
        let exact = solution_closed_form(&spec, &path)?;
        let fd = solve_fd_oracle(&spec, &path)?;
        let err = exact.v_prime.iter().zip(&fd.v_prime).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let (m, x) = max_abs_strain(&spec, &path)?;
        println!("n = {:>5}: max |v'| = {m:.6} at x = {x:.4}, |closed - fd| = {err:.3e}", path.grid.len() - 1);
        path = coarsen(&path);
    }

    let sol = solution_closed_form(&spec, &sampler.sample_path(42))?;
    sol.write_csv(std::fs::File::create("solution.csv").expect("create solution.csv")).expect("write");
    println!("wrote solution.csv");
    Ok(())
}
