//! Acceptance criteria, one `PASS`/`FAIL` line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero if any fails.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;

use straintail::asymptotics::{
    boundary_level_lhs, d_boundary, d_interior, h_boundary, interior_level_lhs, interior_y_cutoff, kappa_const,
    limit_profile, location_ratio_r, location_ratio_r_grid, solve_u_boundary, solve_u_interior, BoundaryEnd,
};
use straintail::field::{rng_from_seed, sub_seed, FieldSampler, Grid, PathSample};
use straintail::normal;
use straintail::quadrature::{integrate, integrate_2d, Tolerance};
use straintail::rare_event::{compare, CompareOptions, EstimatorKind, LocateOptions, Simulation};
use straintail::solver::{solve_fd_oracle, strain_closed_form, ForcingKind, ForcingProfile, ProblemSpec};
use straintail::truncnorm::{shifted_moment, TruncatedMomentTable};
use straintail::{Result, StationaryKernel};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn se(ell: f64) -> StationaryKernel {
    StationaryKernel::squared_exponential(ell).unwrap()
}

fn constant_spec(sigma: f64) -> ProblemSpec {
    let forcing = ForcingProfile::new(ForcingKind::Constant { p0: 1.0 }, 1.0).unwrap();
    ProblemSpec::new(1.0, sigma, se(0.2), forcing).unwrap()
}

fn bump_spec(sigma: f64) -> ProblemSpec {
    let kind = ForcingKind::GaussianBump { base: 0.2, amplitude: 1.0, center: 0.5, width: 0.15 };
    let forcing = ForcingProfile::new(kind, 1.0).unwrap();
    ProblemSpec::new(1.0, sigma, se(0.2), forcing).unwrap()
}

// 1: boundary maximizer in the limit u -> infinity
fn limit_maximizer() -> Result<Outcome> {
    let lim = limit_profile()?;
    Ok(outcome((0.47..=0.49).contains(&lim.zeta), format!("zeta_L = {:.6}", lim.zeta)))
}

// 2: sign of d|H_L|/dx at x = zeta, u = infinity
fn boundary_monotonicity() -> Result<Outcome> {
    let spec = constant_spec(0.5);
    let h = 1e-5;
    let abs_h = |x: f64, z: f64| h_boundary(x, z, f64::INFINITY, BoundaryEnd::Right, &spec).map(f64::abs);
    let mut bad = Vec::new();
    let mut min = (f64::INFINITY, 0.0);
    for i in 0..=840 {
        let z = i as f64 * 1e-3;
        // second-order one-sided difference, x <= zeta
        let d = (3.0 * abs_h(z, z)? - 4.0 * abs_h(z - h, z)? + abs_h(z - 2.0 * h, z)?) / (2.0 * h);
        if d < min.0 {
            min = (d, z);
        }
        if d <= 0.0 || d.is_nan() {
            bad.push((z, d));
        }
    }
    let detail = if bad.is_empty() {
        format!("841 grid points, min derivative {:.3e} at zeta = {:.3}", min.0, min.1)
    } else {
        let list: Vec<String> = bad.iter().map(|(z, d)| format!("{z:.3} ({d:.2e})")).collect();
        format!("non-positive at zeta = {}; the sign changes where zeta (zeta - E[Z|Z<=zeta]) = 1", list.join(", "))
    };
    Ok(outcome(bad.is_empty(), detail))
}

// 3: location ratio
fn ratio_r() -> Result<Outcome> {
    let refined = location_ratio_r();
    let grid = location_ratio_r_grid(1e-3);
    let pass = refined > 1.0 && grid.r > 1.0 && (refined - grid.r).abs() <= 1e-3 && (refined - 1.469).abs() < 5e-3;
    Ok(outcome(pass, format!("r = {refined:.6} (refined), {:.6} (grid 1e-3)", grid.r)))
}

// 4: truncated moments against quadrature
fn truncated_moments() -> Result<Outcome> {
    let mut rng = rng_from_seed(2024);
    let tol = Tolerance::new(0.0, 1e-13);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let zeta: f64 = rng.random_range(-6.0..6.0);
        let x: f64 = rng.random_range(-6.0..6.0);
        // Z = zeta - t, t >= 0
        let e = |g: &dyn Fn(f64) -> f64| -> Result<f64> {
            let den = integrate(|t| normal::pdf(zeta - t), 0.0, 40.0, tol)?.value;
            let num_tol = Tolerance::new(1e-13 * den, 1e-13);
            let num = integrate(|t| g(zeta - t) * normal::pdf(zeta - t), 0.0, 40.0, num_tol)?.value;
            Ok(num / den)
        };
        let table = TruncatedMomentTable::new(zeta)?;
        for k in 0..=5 {
            worst = worst.max((table.moment(k) - e(&|z| z.powi(k as i32))?).abs());
        }
        for k in 1..=3 {
            worst = worst.max((shifted_moment(x, zeta, k)? - e(&|z| (x - z).powi(k as i32))?).abs());
        }
    }
    Ok(outcome(worst <= 1e-9, format!("max abs error {worst:.2e} over 200 draws")))
}

fn coarsen(path: &PathSample) -> PathSample {
    PathSample {
        grid: Arc::new(path.grid.coarsen().unwrap()),
        values: path.values.iter().step_by(2).copied().collect(),
        ..path.clone()
    }
}

fn solver_error(spec: &ProblemSpec, path: &PathSample) -> Result<f64> {
    let cf = strain_closed_form(spec, path)?;
    let fd = solve_fd_oracle(spec, path)?;
    let scale = cf.iter().map(|(_, s)| s.abs()).fold(0.0, f64::max);
    let err = cf.iter().zip(&fd.v_prime).map(|((_, a), b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(err / scale)
}

// 5: closed-form strain against the finite-volume oracle
fn solver_cross_validation() -> Result<Outcome> {
    let spec = bump_spec(0.5);
    let sampler = FieldSampler::new(&spec.kernel, Grid::uniform(1.0, 4096)?)?;
    let mut sup = [0.0f64; 3]; // grids 1024, 2048, 4096
    let mut ratio_range = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..50 {
        let fine = sampler.sample_path(sub_seed(5, i));
        let mid = coarsen(&fine);
        let coarse = coarsen(&mid);
        let e = [solver_error(&spec, &coarse)?, solver_error(&spec, &mid)?, solver_error(&spec, &fine)?];
        for k in 0..3 {
            sup[k] = sup[k].max(e[k]);
        }
        for r in [e[0] / e[1], e[1] / e[2]] {
            ratio_range = (ratio_range.0.min(r), ratio_range.1.max(r));
        }
    }
    let pass = sup[2] <= 1e-3 && ratio_range.0 >= 3.0 && ratio_range.1 <= 5.0;
    Ok(outcome(
        pass,
        format!(
            "sup rel error {:.2e} / {:.2e} / {:.2e} at 1024 / 2048 / 4096; per-path doubling ratios in [{:.3}, {:.3}]",
            sup[0], sup[1], sup[2], ratio_range.0, ratio_range.1
        ),
    ))
}

// 6: covariance of (xi, xi', xi'') from five-point stencils on direct draws
fn joint_derivative_law() -> Result<Outcome> {
    let kernel = se(0.2);
    let h = 0.02;
    let sampler = FieldSampler::new(&kernel, Grid::new((0..5).map(|i| i as f64 * h).collect())?)?;
    let n = 10_000;
    let mut sums = [[0.0f64; 3]; 3];
    let mut sq = [[0.0f64; 3]; 3];
    let mut v = [0.0; 5];
    for i in 0..n {
        sampler.draw_into(&mut rng_from_seed(sub_seed(6, i)), &mut v);
        let g = [
            v[2],
            (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * h),
            (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h),
        ];
        for a in 0..3 {
            for b in 0..3 {
                sums[a][b] += g[a] * g[b];
                sq[a][b] += (g[a] * g[b]).powi(2);
            }
        }
    }
    let want = kernel.joint_deriv_cov();
    let nf = n as f64;
    let mut worst = 0.0f64;
    for a in 0..3 {
        for b in 0..3 {
            let mean = sums[a][b] / nf;
            let stderr = ((sq[a][b] / nf - mean * mean) / (nf - 1.0)).sqrt();
            worst = worst.max((mean - want[(a, b)]).abs() / stderr);
        }
    }
    Ok(outcome(worst <= 3.0, format!("max |sample - exact| = {worst:.2} stderr (Delta = 25, A = 1875)")))
}

// 7: prefactors against brute-force quadrature of the defining integrals
fn prefactor_consistency() -> Result<Outcome> {
    let spec = bump_spec(0.5);
    let m = spec.kernel.spectral_moments()?;
    let (d, a, s) = (m.delta, m.a, spec.sigma);
    let gap = a - d * d;
    let pref = d.sqrt() / ((2.0 * PI).powf(1.5) * gap.sqrt());
    let z_sd = gap.sqrt() / d;

    let xi = limit_profile()?.xi;
    let kappa = kappa_const(BoundaryEnd::Left, limit_profile()?.zeta, &spec)?;
    let closed = d_boundary(xi, kappa, &spec)?;
    let z0 = gap / (2.0 * s * d * d);
    let y_half = 12.0 * (d / xi).sqrt();
    let brute = pref
        * (kappa / s).exp()
        * integrate_2d(
            |y, z| (-0.5 * (d * d * z * z / gap - z / s + xi / d * y * y)).exp(),
            (-y_half, y_half),
            (z0 - 14.0 * z_sd, z0 + 14.0 * z_sd),
            Tolerance::new(0.0, 1e-11),
        )?
        .value;
    let rel_b = ((closed - brute) / brute).abs();

    let x = spec.forcing.x_stars()[0];
    let ratio = spec.forcing.d2p(x) / spec.forcing.p(x);
    let nested = d_interior(x, &spec)?;
    let y_max = interior_y_cutoff(x, &spec)?;
    let z_hi = gap / (d * d) * (1.0 / (2.0 * s) + y_max * y_max / (2.0 * d)) + 14.0 * z_sd;
    let full = pref
        * (a / (24.0 * s * s * d * d) + ratio / (6.0 * s * s * d)).exp()
        * integrate_2d(
            |y, z| {
                let y2 = y * y;
                (-0.5
                    * (d * d * z * z / gap - z / s - y2 * z / d
                        + a / (4.0 * d.powi(4)) * y2 * y2
                        + y2 * (a / (2.0 * s * d.powi(3)) - ratio / (s * d * d))))
                    .exp()
            },
            (-y_max, y_max),
            (z0 - 14.0 * z_sd, z_hi),
            Tolerance::new(0.0, 1e-9),
        )?
        .value;
    let rel_i = ((nested - full) / full).abs();
    Ok(outcome(rel_b <= 1e-8 && rel_i <= 1e-6, format!("boundary rel diff {rel_b:.2e}, interior rel diff {rel_i:.2e}")))
}

// 8: level equations reproduce b
fn level_round_trips() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for sigma in [0.3, 1.0] {
        let bump = bump_spec(sigma);
        let flat = constant_spec(sigma);
        for b in [1e2, 1e4, 1e8] {
            let rel = |lhs: f64| ((lhs - b) / b).abs();
            let u = solve_u_interior(b, &bump)?.u;
            worst = worst.max(rel(interior_level_lhs(u, &bump)?));
            for end in [BoundaryEnd::Left, BoundaryEnd::Right] {
                let u = solve_u_boundary(b, end, &bump)?.u;
                worst = worst.max(rel(boundary_level_lhs(u, end, &bump)?));
            }
            let u = solve_u_boundary(b, BoundaryEnd::Homo, &flat)?.u;
            worst = worst.max(rel(boundary_level_lhs(u, BoundaryEnd::Homo, &flat)?));
        }
    }
    Ok(outcome(worst <= 1e-9, format!("max rel residual {worst:.2e} over 24 solves")))
}

const MC_N: usize = 200_000;
const MC_GRID: usize = 512;
const MC_SEED: u64 = 20_240_611;

// 9: approximation over tilted Monte Carlo, constant forcing
fn mc_trend() -> Result<Outcome> {
    let spec = constant_spec(0.5);
    let opts = CompareOptions { method: Some(EstimatorKind::Tilted), ..Default::default() };
    let rows = compare(&spec, &[1.5, 2.0, 2.5], MC_N, MC_GRID, MC_SEED, opts)?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio.unwrap_or(f64::NAN)).collect();
    let in_band = ratios.iter().all(|r| (1.0 / 3.0..=3.0).contains(r));
    let toward_one = ratios.windows(2).all(|w| w[1].ln().abs() < w[0].ln().abs());
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "b = {}: p_hat = {:.3e} +- {:.1e}, approx = {:.3e}, ratio = {:.3e}",
                r.b,
                r.p_hat,
                r.stderr,
                r.approx_total.unwrap_or(f64::NAN),
                r.ratio.unwrap_or(f64::NAN)
            )
        })
        .collect();
    Ok(outcome(
        in_band && toward_one,
        format!("{}; in [1/3, 3]: {in_band}, monotone toward 1: {toward_one}", lines.join("; ")),
    ))
}

// 10: arg-max concentrates at the ends, symmetrically
fn location_concentration() -> Result<Outcome> {
    let spec = constant_spec(0.5);
    let sim = Simulation::new(&spec, MC_GRID)?;
    let opts = LocateOptions { rho: Some(0.4), ..Default::default() };
    let h = sim.locate(2.5, MC_N, MC_SEED, &opts)?;
    let near = h.mass_left + h.mass_right;
    let sym = h.left_minus_right.abs() <= 3.0 * h.left_minus_right_stderr;
    Ok(outcome(
        near >= 0.8 && sym,
        format!(
            "b = 2.5: mass within 0.4 of the ends {near:.4}, left {:.4}, right {:.4}, left - right {:.4} +- {:.4}",
            h.mass_left, h.mass_right, h.left_minus_right, h.left_minus_right_stderr
        ),
    ))
}

// 11: tilted against direct
fn tilted_estimator() -> Result<Outcome> {
    let spec = constant_spec(0.5);
    let sim = Simulation::new(&spec, MC_GRID)?;
    let d = sim.direct(1.62, MC_N, MC_SEED)?;
    let t = sim.tilted(1.62, MC_N, MC_SEED + 1, None)?;
    let z = (d.p_hat - t.p_hat).abs() / (d.stderr.powi(2) + t.stderr.powi(2)).sqrt();
    let d_rare = sim.direct(2.5, MC_N, MC_SEED + 2)?;
    let t_rare = sim.tilted(2.5, MC_N, MC_SEED + 3, None)?;
    let gain = d_rare.relative_stderr() / t_rare.relative_stderr();
    Ok(outcome(
        z <= 3.0 && gain >= 5.0,
        format!(
            "b = 1.62: direct {:.3e} +- {:.1e}, tilted {:.3e} +- {:.1e}, |z| = {z:.2} (agree: {}); \
             b = 2.5: rel stderr direct {:.3} ({:.2e}), tilted {:.3} ({:.2e}), gain {gain:.2}x (>= 5x: {})",
            d.p_hat,
            d.stderr,
            t.p_hat,
            t.stderr,
            z <= 3.0,
            d_rare.relative_stderr(),
            d_rare.p_hat,
            t_rare.relative_stderr(),
            t_rare.p_hat,
            gain >= 5.0
        ),
    ))
}

fn main() {
    type Check = fn() -> Result<Outcome>;
    let criteria: [(u32, &str, Check, Duration); 11] = [
        (1, "boundary maximizer zeta_L in [0.47, 0.49]", limit_maximizer, Duration::from_secs(1)),
        (2, "d|H_L|/dx > 0 at x = zeta on [0, 0.84]", boundary_monotonicity, Duration::from_secs(1)),
        (3, "location ratio r > 1, grid vs refined", ratio_r, Duration::from_secs(5)),
        (4, "truncated moments vs quadrature", truncated_moments, Duration::from_secs(5)),
        (5, "closed-form strain vs finite-volume oracle", solver_cross_validation, Duration::from_secs(30)),
        (6, "joint law of (xi, xi', xi'')", joint_derivative_law, Duration::from_secs(60)),
        (7, "prefactors vs 2D quadrature", prefactor_consistency, Duration::from_secs(10)),
        (8, "level equation round trips", level_round_trips, Duration::from_secs(1)),
        (9, "approximation / Monte Carlo trend, constant forcing", mc_trend, Duration::from_secs(600)),
        (10, "arg-max concentration at the ends", location_concentration, Duration::from_secs(600)),
        (11, "tilted estimator: agreement and variance gain", tilted_estimator, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    let mut mc_elapsed = Duration::ZERO;
    for (id, name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        // 9 and 10 share one budget
        let within = if id == 9 || id == 10 {
            mc_elapsed += elapsed;
            mc_elapsed <= budget
        } else {
            elapsed <= budget
        };
        let (pass, detail) = match result {
            Ok(o) => (o.pass && within, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} #{id} {name}: {detail} [{:.2}s, budget {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if within { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
