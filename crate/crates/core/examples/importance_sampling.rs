//! Direct against tilted Monte Carlo as the threshold grows.
//!
//! cargo run --release --example importance_sampling

use straintail::rare_event::Simulation;
use straintail::{ForcingKind, ForcingProfile, ProblemSpec, StationaryKernel};

fn main() -> straintail::Result<()> {
    let forcing = ForcingProfile::new(ForcingKind::Constant { p0: 1.0 }, 1.0)?;
    let spec = ProblemSpec::new(1.0, 0.5, StationaryKernel::squared_exponential(0.2)?, forcing)?;
    let sim = Simulation::new(&spec, 256)?;
    let n = 50_000;
    println!("{:>5} {:>22} {:>22} {:>7}", "b", "direct", "tilted", "zeta*");
    for b in [1.2, 1.6, 2.0, 2.5, 3.0] {
        let d = sim.direct(b, n, 1)?;
        let t = sim.tilted(b, n, 2, None)?;
        println!(
            "{b:>5} {:>11.3e} +- {:>7.1e} {:>11.3e} +- {:>7.1e} {:>7.3}",
            d.p_hat,
            d.stderr,
            t.p_hat,
            t.stderr,
            t.zeta.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
