//! Asymptotic tail probability for the three forcing shapes.

use straintail::asymptotics::{dominant_location, limit_profile};
use straintail::{approximate_tail, ApproxOptions, ForcingKind, ForcingProfile, ProblemSpec, StationaryKernel};

fn spec(kind: ForcingKind) -> straintail::Result<ProblemSpec> {
    ProblemSpec::new(1.0, 0.5, StationaryKernel::squared_exponential(0.2)?, ForcingProfile::new(kind, 1.0)?)
}

fn main() -> straintail::Result<()> {
    let lim = limit_profile()?;
    println!("limit profile: zeta {:.6}, Xi {:.6}", lim.zeta, lim.xi);

    let cases = [
        ("constant", ForcingKind::Constant { p0: 1.0 }),
        ("gaussian bump", ForcingKind::GaussianBump { base: 0.2, amplitude: 1.0, center: 0.5, width: 0.15 }),
        ("mild cosine", ForcingKind::CosineBump { base: 1.0, amplitude: 0.3, center: 0.5, width: 1.0 }),
    ];
    for (name, kind) in cases {
        let s = spec(kind)?;
        println!("\n{name}");
        for b in [10.0, 100.0, 1e4] {
            let r = approximate_tail(b, &s, ApproxOptions::default())?;
            println!(
                "  b = {b:>7}: total {:.4e}  interior {:.3e}  left {:.3e}  right {:.3e}  ({:?})",
                r.total, r.term_interior, r.term_left, r.term_right, r.dominant
            );
            if let Some(lit) = r.total_theorem_literal {
                println!("             literal Case 2 form {lit:.4e}");
            }
        }
        let d = dominant_location(100.0, &s)?;
        println!("  dominant: {:?} (criterion {:?}, r = {:.4})", d.by_terms, d.analytic, d.r);
    }
    Ok(())
}
