//! Where the strain peaks when it exceeds `b`, for a forcing with an
//! interior maximum and for constant forcing.

use straintail::rare_event::{LocateOptions, Simulation};
use straintail::{ForcingKind, ForcingProfile, ProblemSpec, StationaryKernel};

fn main() -> straintail::Result<()> {
    let kernel = StationaryKernel::squared_exponential(0.2)?;
    let cases = [
        ("constant", ForcingKind::Constant { p0: 1.0 }, 2.0),
        ("bump", ForcingKind::GaussianBump { base: 0.2, amplitude: 1.0, center: 0.5, width: 0.15 }, 0.6),
    ];
    for (name, kind, b) in cases {
        let spec = ProblemSpec::new(1.0, 0.5, kernel.clone(), ForcingProfile::new(kind, 1.0)?)?;
        let h = Simulation::new(&spec, 256)?.locate(b, 40_000, 9, &LocateOptions { bins: 20, ..Default::default() })?;
        println!("{name}, b = {b}: p_hat {:.3e}, {} hits", h.p_hat, h.hits);
        for (i, m) in h.masses.iter().enumerate() {
            println!(
                "  [{:.2}, {:.2}) {:<50} {m:.3}",
                h.edges[i],
                h.edges[i + 1],
                "#".repeat((m * 100.0).round() as usize)
            );
        }
        println!(
            "  near ends: left {:.3} right {:.3}; near x*: {:.3}\n",
            h.mass_left, h.mass_right, h.mass_near_x_star
        );
    }
    Ok(())
}
