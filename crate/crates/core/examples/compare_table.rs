//! Monte Carlo against the asymptotic approximation over a list of
//! thresholds, written as CSV to stdout.
//!
//! cargo run --release --example compare_table

use straintail::rare_event::{compare, write_compare_csv, CompareOptions};
use straintail::{ForcingKind, ForcingProfile, ProblemSpec, StationaryKernel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let forcing = ForcingProfile::new(ForcingKind::Constant { p0: 1.0 }, 1.0)?;
    let spec = ProblemSpec::new(1.0, 0.5, StationaryKernel::squared_exponential(0.2)?, forcing)?;
    let rows = compare(&spec, &[1.5, 2.0, 2.5, 3.0], 100_000, 256, 17, CompareOptions::default())?;
    write_compare_csv(&rows, std::io::stdout().lock())?;
    Ok(())
}
