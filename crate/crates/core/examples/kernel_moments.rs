//! Spectral moments of the squared-exponential kernel and the assumption
//! checks run before any approximation.
//!
//! cargo run --example kernel_moments -- 0.2

use straintail::kernel::check_assumptions;
use straintail::StationaryKernel;

fn main() -> straintail::Result<()> {
    let ell: f64 = std::env::args().nth(1).map(|s| s.parse().expect("length scale")).unwrap_or(0.2);
    let kernel = StationaryKernel::squared_exponential(ell)?;
    let m = kernel.spectral_moments()?;
    let (fd_delta, fd_a) = kernel.fd_spectral_moments();
    println!("length scale {ell}");
    println!("Delta = {:.10}  (finite differences {fd_delta:.10})", m.delta);
    println!("A     = {:.10}  (finite differences {fd_a:.10})", m.a);
    println!("A - Delta^2 = {:.6}", m.a - m.delta * m.delta);

    let c = kernel.joint_deriv_cov();
    println!("cov(xi, xi', xi''):");
    for i in 0..3 {
        println!("  {:>12.4} {:>12.4} {:>12.4}", c[(i, 0)], c[(i, 1)], c[(i, 2)]);
    }

    let lags: Vec<f64> = (1..=400).map(|i| i as f64 / 400.0).collect();
    let report = check_assumptions(&kernel, &lags)?;
    for check in &report.checks {
        println!("{:<6} {:<5} {}", check.name, if check.passed { "ok" } else { "FAIL" }, check.detail);
    }
    Ok(())
}
