//! Moments of a standard normal conditioned on `Z <= zeta`.

use straintail::normal;
use straintail::truncnorm::{shifted_moment, TruncatedMomentTable};

fn main() -> straintail::Result<()> {
    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "zeta", "m1", "m2", "m4", "E(zeta-Z)");
    for zeta in [-10.0, -6.0, -2.0, 0.0, 0.481, 2.0, 6.0] {
        let t = TruncatedMomentTable::new(zeta)?;
        println!(
            "{zeta:>6.3} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            t.moment(1),
            t.moment(2),
            t.moment(4),
            shifted_moment(zeta, zeta, 1)?
        );
    }
    // deep in the lower tail the mean approaches zeta
    let z = -30.0;
    println!(
        "zeta = {z}: m1 = {:.10}, Mills ratio {:.10e}",
        TruncatedMomentTable::new(z)?.moment(1),
        normal::mills_ratio(-z)
    );
    Ok(())
}
