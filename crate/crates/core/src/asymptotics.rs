//! Closed-form tail approximation of `w(b) = P(max |v'| > b)`.
//!
//! Three places can carry the excursion: an interior maximizer `x*` of
//! `|p|`, and the two ends of the domain. Each contributes a term
//! `D u^{-a} exp(-u^2 / 2)` where `u` solves a level equation and `D` is a
//! prefactor built from the kernel's spectral moments, the local shape of `p`
//! and, at the ends, a boundary profile
//!
//! ```text
//! H_end(x, zeta; u) = sign(p) e^{-x^2/2} E[ p (x - Z) +- p' / (2 sqrt(Delta sigma u)) (x - Z)^2 | Z <= zeta ]
//! ```
//!
//! (`+` at the left end, `-` at the right end). With constant forcing only the
//! two end terms remain and they coincide.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{check_assumptions, SpectralMoments};
use crate::optimize::{brent_root, scan_then_golden, Maximum};
use crate::quadrature::{integrate, Tolerance};
use crate::solver::{ForcingCase, ProblemSpec};
use crate::truncnorm::TruncatedMomentTable;

/// Default search interval for the boundary maximizer `zeta`.
pub const ZETA_SEARCH: (f64, f64) = (-2.0, 3.0);
const ZETA_SEARCH_WIDE: (f64, f64) = (-4.0, 6.0);
/// Central-difference step for the curvature of `G`.
pub const XI_STEP: f64 = 1e-3;
/// Allowed change of the curvature when the step is halved.
pub const XI_RICHARDSON_TOL: f64 = 1e-4;
/// Relative residual allowed for a level solution.
pub const LEVEL_RTOL: f64 = 1e-9;

fn asymptotic_moments(spec: &ProblemSpec) -> Result<SpectralMoments> {
    if !(spec.sigma > 0.0) {
        return Err(Error::Assumption("the asymptotic approximation needs sigma > 0".into()));
    }
    spec.kernel.spectral_moments()
}

// ---------------------------------------------------------------------------
// interior

/// `|x| exp(-Delta sigma u x^2 / 2)`.
pub fn h_interior(x: f64, u: f64, spec: &ProblemSpec) -> Result<f64> {
    let m = asymptotic_moments(spec)?;
    Ok(x.abs() * (-0.5 * m.delta * spec.sigma * u * x * x).exp())
}

/// Maximizer of [`h_interior`] over `x > 0`: `(u Delta sigma)^{-1/2}`.
pub fn gamma_star(u: f64, spec: &ProblemSpec) -> Result<f64> {
    let m = asymptotic_moments(spec)?;
    Ok((u * m.delta * spec.sigma).powf(-0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelKind {
    #[serde(rename = "interior-u")]
    Interior,
    #[serde(rename = "left-u0")]
    Left,
    #[serde(rename = "right-uL")]
    Right,
    #[serde(rename = "homo-uh")]
    Homo,
}

/// Root of a level equation `lhs(u) = b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSolution {
    pub u: f64,
    /// `lhs(u) - b`.
    pub residual: f64,
    pub which: LevelKind,
}

/// Solves `log_lhs(u) = ln b` on the increasing branch `u > 1 / (2 sigma)`.
fn solve_level<F>(b: f64, sigma: f64, which: LevelKind, mut log_lhs: F) -> Result<LevelSolution>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidInput(format!("threshold b must be positive and finite, got {b}")));
    }
    let ln_b = b.ln();
    let floor = 0.5 / sigma * (1.0 + 1e-9) + 1e-12;
    let hi = 10.0 * f64::max(1.0, ln_b / sigma);
    if hi <= floor || log_lhs(hi)? - ln_b <= 0.0 {
        return Err(Error::NoBracket { b, lo: floor, hi });
    }
    let mut lo = f64::max(1.0, ln_b / (2.0 * sigma)).max(floor);
    if lo >= hi || log_lhs(lo)? - ln_b > 0.0 {
        lo = floor;
        if log_lhs(lo)? - ln_b > 0.0 {
            return Err(Error::NoBracket { b, lo, hi });
        }
    }
    let mut failure = None;
    let u = brent_root(
        |u| match log_lhs(u) {
            Ok(v) => v - ln_b,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-14 * hi,
        300,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let residual = b * (log_lhs(u)? - ln_b).exp_m1();
    if !(residual.abs() <= LEVEL_RTOL * b) {
        return Err(Error::Numerical(format!("level equation residual {residual} at u = {u} exceeds tolerance")));
    }
    Ok(LevelSolution { u, residual, which })
}

/// Solves `|p(x*)| / sqrt(sigma Delta u) exp(sigma u - 1/2) = b`.
pub fn solve_u_interior(b: f64, spec: &ProblemSpec) -> Result<LevelSolution> {
    let m = asymptotic_moments(spec)?;
    let x_star = *spec
        .forcing
        .x_stars()
        .first()
        .ok_or_else(|| Error::InvalidInput("forcing has no interior maximizer".into()))?;
    let ln_p = spec.forcing.p(x_star).abs().ln();
    let s = spec.sigma;
    solve_level(b, s, LevelKind::Interior, |u| Ok(ln_p - 0.5 * (s * m.delta * u).ln() + s * u - 0.5))
}

/// Left-hand side of the interior level equation.
pub fn interior_level_lhs(u: f64, spec: &ProblemSpec) -> Result<f64> {
    let m = asymptotic_moments(spec)?;
    let x_star = *spec
        .forcing
        .x_stars()
        .first()
        .ok_or_else(|| Error::InvalidInput("forcing has no interior maximizer".into()))?;
    let s = spec.sigma;
    Ok(spec.forcing.p(x_star).abs() / (s * m.delta * u).sqrt() * (s * u - 0.5).exp())
}

// ---------------------------------------------------------------------------
// boundary profiles

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryEnd {
    Left,
    Right,
    /// Constant forcing, where both ends share one profile.
    Homo,
}

#[derive(Debug, Clone, Copy)]
struct EndData {
    p: f64,
    dp: f64,
    d2p: f64,
    /// Sign in front of the `p'` correction.
    side: f64,
}

impl EndData {
    fn of(end: BoundaryEnd, spec: &ProblemSpec) -> Result<Self> {
        let f = &spec.forcing;
        let l = spec.length;
        Ok(match end {
            BoundaryEnd::Left => EndData { p: f.p(0.0), dp: f.dp(0.0), d2p: f.d2p(0.0), side: 1.0 },
            BoundaryEnd::Right => EndData { p: f.p(l), dp: f.dp(l), d2p: f.d2p(l), side: -1.0 },
            BoundaryEnd::Homo => {
                if f.case() != ForcingCase::Constant {
                    return Err(Error::InvalidInput("the homogeneous profile needs constant forcing".into()));
                }
                EndData { p: f.p(0.0), dp: 0.0, d2p: 0.0, side: 0.0 }
            }
        })
    }

    fn unit() -> Self {
        EndData { p: 1.0, dp: 0.0, d2p: 0.0, side: 0.0 }
    }

    fn h(&self, t: &TruncatedMomentTable, x: f64, corr: f64) -> f64 {
        let sign = if self.p < 0.0 { -1.0 } else { 1.0 };
        let mut inner = self.p * t.shifted(x, 1);
        if corr != 0.0 && self.dp != 0.0 {
            inner += self.side * self.dp * corr * t.shifted(x, 2);
        }
        sign * (-0.5 * x * x).exp() * inner
    }

    /// `sup_{x <= zeta}` of `H` (or of `|H|`).
    fn inner_sup(&self, zeta: f64, corr: f64, magnitude: bool) -> Maximum {
        let t = match TruncatedMomentTable::new(zeta) {
            Ok(t) => t,
            Err(_) => return Maximum { x: zeta, value: f64::NAN },
        };
        let lo = zeta.min(0.0) - 10.0;
        scan_then_golden(
            |x| {
                let v = self.h(&t, x, corr);
                if magnitude {
                    v.abs()
                } else {
                    v
                }
            },
            lo,
            zeta,
            401,
            1e-12,
        )
    }
}

fn correction(u: f64, delta: f64, sigma: f64) -> f64 {
    if u.is_infinite() {
        0.0
    } else {
        0.5 / (delta * sigma * u).sqrt()
    }
}

/// Maximizes `f` over the default `zeta` interval, widening once if the
/// optimum lands on an edge.
fn outer_max<F: FnMut(f64) -> f64>(mut f: F) -> Result<Maximum> {
    for (attempt, (lo, hi)) in [ZETA_SEARCH, ZETA_SEARCH_WIDE].into_iter().enumerate() {
        let m = scan_then_golden(&mut f, lo, hi, 101, 1e-10);
        if !m.value.is_finite() {
            return Err(Error::Numerical(format!("boundary profile is not finite at zeta = {}", m.x)));
        }
        let edge = if m.x - lo < 1e-6 {
            Some(lo)
        } else if hi - m.x < 1e-6 {
            Some(hi)
        } else {
            None
        };
        match edge {
            None => return Ok(m),
            Some(edge) if attempt == 1 => return Err(Error::SearchEdge { edge }),
            Some(_) => {}
        }
    }
    unreachable!()
}

/// `H_end(x, zeta; u)`; pass `u = f64::INFINITY` for the limit form.
pub fn h_boundary(x: f64, zeta: f64, u: f64, end: BoundaryEnd, spec: &ProblemSpec) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::InvalidInput(format!("u must be positive, got {u}")));
    }
    if !(x <= zeta) {
        return Err(Error::InvalidInput(format!("H is defined for x <= zeta, got x = {x}, zeta = {zeta}")));
    }
    let m = asymptotic_moments(spec)?;
    let t = TruncatedMomentTable::new(zeta)?;
    Ok(EndData::of(end, spec)?.h(&t, x, correction(u, m.delta, spec.sigma)))
}

/// `G(zeta; u) = sup_{x <= zeta} ln |H(x, zeta; u)|`.
pub fn g_function(zeta: f64, u: f64, end: BoundaryEnd, spec: &ProblemSpec) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::InvalidInput(format!("u must be positive, got {u}")));
    }
    let m = asymptotic_moments(spec)?;
    let ed = EndData::of(end, spec)?;
    Ok(ed.inner_sup(zeta, correction(u, m.delta, spec.sigma), true).value.ln())
}

/// Maximizer and curvature of `G` in the limit `u -> infinity`. In that
/// limit `|H| = |p| e^{-x^2/2} (x - E[Z | Z <= zeta])`, so `zeta`, the inner
/// maximizer and the curvature do not depend on the forcing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitProfile {
    pub zeta: f64,
    pub x: f64,
    /// `G` at the maximizer for `|p| = 1`.
    pub g_unit: f64,
    /// `-G''(zeta)` with step [`XI_STEP`].
    pub xi: f64,
    /// Same with half the step.
    pub xi_half_step: f64,
}

fn compute_limit_profile() -> Result<LimitProfile> {
    let unit = EndData::unit();
    let g = |z: f64| unit.inner_sup(z, 0.0, true).value.ln();
    let best = outer_max(g)?;
    let zeta = best.x;
    let curvature = |h: f64| -(g(zeta + h) - 2.0 * g(zeta) + g(zeta - h)) / (h * h);
    let xi = curvature(XI_STEP);
    let xi_half_step = curvature(0.5 * XI_STEP);
    if !(xi > 0.0) {
        return Err(Error::Numerical(format!("G is not strictly concave at its maximizer: Xi = {xi}")));
    }
    if (xi - xi_half_step).abs() > XI_RICHARDSON_TOL {
        return Err(Error::Numerical(format!("curvature unstable under step halving: {xi} vs {xi_half_step}")));
    }
    let x = unit.inner_sup(zeta, 0.0, true).x;
    Ok(LimitProfile { zeta, x, g_unit: best.value, xi, xi_half_step })
}

/// The (cached) limit profile.
pub fn limit_profile() -> Result<LimitProfile> {
    static CACHE: OnceLock<std::result::Result<LimitProfile, String>> = OnceLock::new();
    CACHE.get_or_init(|| compute_limit_profile().map_err(|e| e.to_string())).clone().map_err(Error::Numerical)
}

/// `G` maximized over `zeta` at a given `u`, with the curvature taken from
/// the limit profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GProfile {
    pub zeta_hat: f64,
    pub x_hat: f64,
    pub g_max: f64,
    pub xi: f64,
    pub xi_half_step: f64,
    pub zeta_limit: f64,
}

pub fn g_and_zeta(end: BoundaryEnd, u: f64, spec: &ProblemSpec) -> Result<GProfile> {
    if !(u > 0.0) {
        return Err(Error::InvalidInput(format!("u must be positive, got {u}")));
    }
    let m = asymptotic_moments(spec)?;
    let ed = EndData::of(end, spec)?;
    let corr = correction(u, m.delta, spec.sigma);
    let best = outer_max(|z| ed.inner_sup(z, corr, true).value.ln())?;
    let x_hat = ed.inner_sup(best.x, corr, true).x;
    let lim = limit_profile()?;
    Ok(GProfile {
        zeta_hat: best.x,
        x_hat,
        g_max: best.value,
        xi: lim.xi,
        xi_half_step: lim.xi_half_step,
        zeta_limit: lim.zeta,
    })
}

/// Joint `sup_{x <= zeta} H(x, zeta; u)` with its location `(zeta, x)`.
pub fn boundary_joint_sup(end: BoundaryEnd, u: f64, spec: &ProblemSpec) -> Result<(f64, f64, f64)> {
    let m = asymptotic_moments(spec)?;
    let ed = EndData::of(end, spec)?;
    let corr = correction(u, m.delta, spec.sigma);
    let best = outer_max(|z| ed.inner_sup(z, corr, false).value)?;
    let x = ed.inner_sup(best.x, corr, false).x;
    Ok((best.x, x, best.value))
}

/// Left-hand side `e^{sigma u} / sqrt(Delta sigma u) sup H` of a boundary
/// level equation.
pub fn boundary_level_lhs(u: f64, end: BoundaryEnd, spec: &ProblemSpec) -> Result<f64> {
    let m = asymptotic_moments(spec)?;
    let (_, _, s) = boundary_joint_sup(end, u, spec)?;
    Ok((spec.sigma * u).exp() / (m.delta * spec.sigma * u).sqrt() * s)
}

/// Solves `e^{sigma u} / sqrt(Delta sigma u) sup_{x <= zeta} H(x, zeta; u) = b`,
/// re-optimizing the joint sup at every iterate.
pub fn solve_u_boundary(b: f64, end: BoundaryEnd, spec: &ProblemSpec) -> Result<LevelSolution> {
    let m = asymptotic_moments(spec)?;
    let ed = EndData::of(end, spec)?;
    if ed.p == 0.0 {
        return Err(Error::Assumption(format!("p vanishes at the {end:?} end; its level is undefined")));
    }
    let s = spec.sigma;
    let which = match end {
        BoundaryEnd::Left => LevelKind::Left,
        BoundaryEnd::Right => LevelKind::Right,
        BoundaryEnd::Homo => LevelKind::Homo,
    };
    solve_level(b, s, which, |u| {
        let corr = correction(u, m.delta, s);
        let sup = outer_max(|z| ed.inner_sup(z, corr, false).value)?.value;
        if !(sup > 0.0) {
            return Err(Error::Numerical(format!("boundary profile sup {sup} is not positive at u = {u}")));
        }
        Ok(s * u - 0.5 * (m.delta * s * u).ln() + sup.ln())
    })
}

// ---------------------------------------------------------------------------
// constants

/// The four summands of the boundary constant kappa: quartic, fourth
/// moment, curvature of `p` and skew terms.
pub fn kappa_terms(end: BoundaryEnd, zeta: f64, spec: &ProblemSpec) -> Result<[f64; 4]> {
    let m = asymptotic_moments(spec)?;
    let ed = EndData::of(end, spec)?;
    if ed.p == 0.0 {
        return Err(Error::Assumption(format!("p vanishes at the {end:?} end; kappa is undefined")));
    }
    let t = TruncatedMomentTable::new(zeta)?;
    let e1 = t.shifted(zeta, 1);
    if !(e1 > 0.0) {
        return Err(Error::Numerical(format!("E[zeta - Z | Z <= zeta] = {e1} at zeta = {zeta}")));
    }
    let (a, d, s) = (m.a, m.delta, spec.sigma);
    let scale = 24.0 * d * d * s;
    Ok([
        a * zeta.powi(4) / scale,
        -a * t.moment(4) / scale,
        ed.d2p * t.shifted(zeta, 3) / (6.0 * s * d) / (ed.p * e1),
        a * t.z4_shifted(zeta) / (scale * s) / e1,
    ])
}

pub fn kappa_const(end: BoundaryEnd, zeta: f64, spec: &ProblemSpec) -> Result<f64> {
    Ok(kappa_terms(end, zeta, spec)?.iter().sum())
}

/// Boundary prefactor from the curvature `xi` and constant `kappa`, with both
/// Gaussian integrals done in closed form.
pub fn d_boundary(xi: f64, kappa: f64, spec: &ProblemSpec) -> Result<f64> {
    let m = asymptotic_moments(spec)?;
    if !(xi > 0.0) {
        return Err(Error::InvalidInput(format!("curvature must be positive, got {xi}")));
    }
    let (d, s) = (m.delta, spec.sigma);
    let gap = m.a - d * d;
    let pref = d.sqrt() * (kappa / s).exp() / ((2.0 * PI).powf(1.5) * gap.sqrt());
    let i_z = (2.0 * PI * gap).sqrt() / d * (gap / (8.0 * s * s * d * d)).exp();
    let i_y = (2.0 * PI * d / xi).sqrt();
    Ok(pref * i_z * i_y)
}

struct InteriorShape {
    pref: f64,
    z_factor: f64,
    quartic: f64,
    quadratic: f64,
}

fn interior_shape(x_star: f64, spec: &ProblemSpec) -> Result<InteriorShape> {
    let m = asymptotic_moments(spec)?;
    let p = spec.forcing.p(x_star);
    let ratio = spec.forcing.d2p(x_star) / p;
    if !(ratio < 0.0) {
        return Err(Error::Assumption(format!(
            "p''(x*)/p(x*) = {ratio} at x* = {x_star}; the interior maximizer must be strongly concave"
        )));
    }
    let (d, a, s) = (m.delta, m.a, spec.sigma);
    let gap = a - d * d;
    let c = d * d / gap;
    Ok(InteriorShape {
        pref: d.sqrt() * (a / (24.0 * s * s * d * d) + ratio / (6.0 * s * s * d)).exp()
            / ((2.0 * PI).powf(1.5) * gap.sqrt()),
        z_factor: (2.0 * PI / c).sqrt() * (gap / (8.0 * d * d * s * s)).exp(),
        quartic: 1.0 / (8.0 * d * d),
        quadratic: 1.0 / (4.0 * s * d) - ratio / (2.0 * s * d * d),
    })
}

/// Half-width beyond which the interior `y`-integrand is below `1e-12` of
/// its peak.
pub fn interior_y_cutoff(x_star: f64, spec: &ProblemSpec) -> Result<f64> {
    let sh = interior_shape(x_star, spec)?;
    let target = 1e12f64.ln();
    let s = (-sh.quadratic + (sh.quadratic * sh.quadratic + 4.0 * sh.quartic * target).sqrt()) / (2.0 * sh.quartic);
    Ok(s.sqrt())
}

/// Interior prefactor with the `y`-integral truncated to `[-y_max, y_max]`.
pub fn d_interior_truncated(x_star: f64, spec: &ProblemSpec, y_max: f64) -> Result<f64> {
    let sh = interior_shape(x_star, spec)?;
    let half = integrate(
        |y| {
            let y2 = y * y;
            (-sh.quartic * y2 * y2 - sh.quadratic * y2).exp()
        },
        0.0,
        y_max,
        Tolerance::new(0.0, 1e-13),
    )?;
    Ok(sh.pref * sh.z_factor * 2.0 * half.value)
}

/// Interior prefactor at the maximizer `x_star`. The `z`-integral is
/// Gaussian given `y` and done analytically; the remaining quartic `y`
/// integral is done by adaptive quadrature.
pub fn d_interior(x_star: f64, spec: &ProblemSpec) -> Result<f64> {
    let y_max = interior_y_cutoff(x_star, spec)?;
    d_interior_truncated(x_star, spec, y_max)
}

// ---------------------------------------------------------------------------
// assembled approximation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Location {
    Interior,
    LeftEnd,
    RightEnd,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ApproxOptions {
    /// With constant forcing, use `2 D_h exp(-u_h^2 / 2)` instead of the
    /// default `2 D_h u_h^{-1} exp(-u_h^2 / 2)`.
    pub homo_literal_theorem: bool,
}

/// Result of [`approximate_tail`]. Serializes to a flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub b: f64,
    pub case: ForcingCase,
    pub u: Option<f64>,
    pub u0: Option<f64>,
    #[serde(rename = "uL")]
    pub u_l: Option<f64>,
    pub zeta0: f64,
    #[serde(rename = "zetaL")]
    pub zeta_l: f64,
    #[serde(rename = "Xi0")]
    pub xi0: f64,
    #[serde(rename = "XiL")]
    pub xi_l: f64,
    pub kappa0: Option<f64>,
    #[serde(rename = "kappaL")]
    pub kappa_l: Option<f64>,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    #[serde(rename = "D0")]
    pub d0: Option<f64>,
    #[serde(rename = "DL")]
    pub d_l: Option<f64>,
    pub term_interior: f64,
    pub term_left: f64,
    pub term_right: f64,
    pub total: f64,
    pub log_total: f64,
    pub dominant: Location,
    pub r: f64,
    /// Constant forcing only: the two candidate totals.
    pub total_proof_form: Option<f64>,
    pub total_theorem_literal: Option<f64>,
    /// Where the reported `zeta` values come from.
    pub zeta_source: String,
    /// Boundary maximizers of the joint sup at the solved finite levels.
    pub zeta0_at_u0: Option<f64>,
    #[serde(rename = "zetaL_at_uL")]
    pub zeta_l_at_u_l: Option<f64>,
    pub x_stars: Vec<f64>,
    pub notes: Vec<String>,
}

impl ApproxReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("malformed report: {e}")))
    }
}

struct EndTerm {
    u: Option<f64>,
    kappa: Option<f64>,
    d: Option<f64>,
    zeta_at_u: Option<f64>,
    ln_term: f64,
}

fn end_term(b: f64, end: BoundaryEnd, spec: &ProblemSpec, lim: &LimitProfile, u_power: f64) -> Result<EndTerm> {
    let level = solve_u_boundary(b, end, spec)?;
    let (zeta_at_u, _, _) = boundary_joint_sup(end, level.u, spec)?;
    let kappa = kappa_const(end, lim.zeta, spec)?;
    let d = d_boundary(lim.xi, kappa, spec)?;
    let u = level.u;
    Ok(EndTerm {
        u: Some(u),
        kappa: Some(kappa),
        d: Some(d),
        zeta_at_u: Some(zeta_at_u),
        ln_term: d.ln() - u_power * u.ln() - 0.5 * u * u,
    })
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let top = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + xs.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

fn arg_max_location(ln_terms: [f64; 3]) -> Location {
    let mut best = (Location::Interior, ln_terms[0]);
    for (loc, v) in [(Location::LeftEnd, ln_terms[1]), (Location::RightEnd, ln_terms[2])] {
        if v > best.1 {
            best = (loc, v);
        }
    }
    best.0
}

/// Assembled approximation of `P(max |v'| > b)`.
pub fn approximate_tail(b: f64, spec: &ProblemSpec, opts: ApproxOptions) -> Result<ApproxReport> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidInput(format!("threshold b must be positive and finite, got {b}")));
    }
    asymptotic_moments(spec)?;
    let grid: Vec<f64> = (0..=512).map(|i| spec.length * i as f64 / 512.0).collect();
    let checks = check_assumptions(&spec.kernel, &grid)?;
    if !checks.all_passed() {
        let failed: Vec<String> =
            checks.checks.iter().filter(|c| !c.passed).map(|c| format!("{} ({})", c.name, c.detail)).collect();
        return Err(Error::Assumption(format!("kernel checks failed: {}", failed.join("; "))));
    }
    let lim = limit_profile()?;
    let r = location_ratio_r();
    let mut notes = Vec::new();

    if spec.forcing.case() == ForcingCase::Constant {
        if spec.forcing.p(0.0) == 0.0 {
            return Err(Error::InvalidInput("forcing vanishes identically; the strain is zero".into()));
        }
        let t = end_term(b, BoundaryEnd::Homo, spec, &lim, 1.0)?;
        let u = t.u.unwrap();
        let d_h = t.d.unwrap();
        let proof_form = 2.0 * d_h / u * (-0.5 * u * u).exp();
        let literal = 2.0 * d_h * (-0.5 * u * u).exp();
        let ln_each = if opts.homo_literal_theorem { d_h.ln() - 0.5 * u * u } else { t.ln_term };
        let each = ln_each.exp();
        notes.push(if opts.homo_literal_theorem {
            "constant forcing: total uses 2 D_h exp(-u_h^2/2)".to_string()
        } else {
            "constant forcing: total uses 2 D_h u_h^-1 exp(-u_h^2/2)".to_string()
        });
        return Ok(ApproxReport {
            b,
            case: ForcingCase::Constant,
            u: None,
            u0: t.u,
            u_l: t.u,
            zeta0: lim.zeta,
            zeta_l: lim.zeta,
            xi0: lim.xi,
            xi_l: lim.xi,
            kappa0: t.kappa,
            kappa_l: t.kappa,
            d: None,
            d0: t.d,
            d_l: t.d,
            term_interior: 0.0,
            term_left: each,
            term_right: each,
            total: 2.0 * each,
            log_total: std::f64::consts::LN_2 + ln_each,
            dominant: Location::LeftEnd,
            r,
            total_proof_form: Some(proof_form),
            total_theorem_literal: Some(literal),
            zeta_source: "u-limit".into(),
            zeta0_at_u0: t.zeta_at_u,
            zeta_l_at_u_l: t.zeta_at_u,
            x_stars: Vec::new(),
            notes,
        });
    }

    // interior maximizers
    let x_stars = spec.forcing.x_stars().to_vec();
    let (u, d, ln_interior) = if x_stars.is_empty() {
        notes.push("maximizer of |p| lies on the boundary; interior term dropped".into());
        (None, None, f64::NEG_INFINITY)
    } else {
        let level = solve_u_interior(b, spec)?;
        let mut d_sum = 0.0;
        for &x in &x_stars {
            d_sum += d_interior(x, spec)?;
        }
        if x_stars.len() > 1 {
            notes.push(format!("interior term summed over {} maximizers", x_stars.len()));
        }
        let u = level.u;
        (Some(u), Some(d_sum), d_sum.ln() - 0.5 * u.ln() - 0.5 * u * u)
    };

    let mut ends = Vec::with_capacity(2);
    for (end, x) in [(BoundaryEnd::Left, 0.0), (BoundaryEnd::Right, spec.length)] {
        if spec.forcing.p(x) == 0.0 {
            notes.push(format!("p vanishes at x = {x}; that end's term is set to zero"));
            ends.push(EndTerm { u: None, kappa: None, d: None, zeta_at_u: None, ln_term: f64::NEG_INFINITY });
        } else {
            ends.push(end_term(b, end, spec, &lim, 1.0)?);
        }
    }
    let right = ends.pop().unwrap();
    let left = ends.pop().unwrap();
    let ln_terms = [ln_interior, left.ln_term, right.ln_term];
    let log_total = log_sum_exp(&ln_terms);
    Ok(ApproxReport {
        b,
        case: ForcingCase::InteriorMax,
        u,
        u0: left.u,
        u_l: right.u,
        zeta0: lim.zeta,
        zeta_l: lim.zeta,
        xi0: lim.xi,
        xi_l: lim.xi,
        kappa0: left.kappa,
        kappa_l: right.kappa,
        d,
        d0: left.d,
        d_l: right.d,
        term_interior: ln_interior.exp(),
        term_left: left.ln_term.exp(),
        term_right: right.ln_term.exp(),
        total: log_total.exp(),
        log_total,
        dominant: arg_max_location(ln_terms),
        r,
        total_proof_form: None,
        total_theorem_literal: None,
        zeta_source: "u-limit".into(),
        zeta0_at_u0: left.zeta_at_u,
        zeta_l_at_u_l: right.zeta_at_u,
        x_stars,
        notes,
    })
}

// ---------------------------------------------------------------------------
// location analysis

/// Result of the brute-force search for the location ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioSearch {
    pub r: f64,
    pub zeta: f64,
    pub x: f64,
}

/// `sup_{x <= zeta} e^{(1 - x^2)/2} (x - E[Z | Z <= zeta])` on a grid with
/// spacing `step` over `zeta` in `[-2, 3]`, `x` in `[-3, zeta]`.
pub fn location_ratio_r_grid(step: f64) -> RatioSearch {
    let nz = ((ZETA_SEARCH.1 - ZETA_SEARCH.0) / step).round() as usize;
    let mut best = RatioSearch { r: f64::NEG_INFINITY, zeta: 0.0, x: 0.0 };
    for i in 0..=nz {
        let zeta = ZETA_SEARCH.0 + i as f64 * step;
        let m1 = TruncatedMomentTable::new(zeta).expect("finite zeta").moment(1);
        let nx = ((zeta + 3.0) / step).floor() as usize;
        for j in 0..=nx {
            let x = (-3.0 + j as f64 * step).min(zeta);
            let v = (0.5 * (1.0 - x * x)).exp() * (x - m1);
            if v > best.r {
                best = RatioSearch { r: v, zeta, x };
            }
        }
    }
    best
}

/// The location ratio `r`, refined from the limit profile. Values of
/// `|p(x*)| / |p(end)|` above `r` favour the interior.
pub fn location_ratio_r() -> f64 {
    static R: OnceLock<f64> = OnceLock::new();
    *R.get_or_init(|| match limit_profile() {
        Ok(lim) => (0.5 + lim.g_unit).exp(),
        Err(_) => location_ratio_r_grid(1e-3).r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominantLocation {
    /// Verdict of the `|p(x*)|` versus `r |p(end)|` criterion.
    pub analytic: Location,
    /// Largest term of the assembled approximation.
    pub by_terms: Location,
    pub agree: bool,
    /// `|p(x*)|` equals `r max |p(end)|` to within `1e-9` relative.
    pub tie: bool,
    /// Both ends carry the same `|p|`.
    pub ends_tied: bool,
    pub r: f64,
}

pub fn dominant_location(b: f64, spec: &ProblemSpec) -> Result<DominantLocation> {
    let r = location_ratio_r();
    let f = &spec.forcing;
    let (p0, pl) = (f.p(0.0).abs(), f.p(spec.length).abs());
    let end_max = p0.max(pl);
    let ends_tied = p0 == pl;
    let end_loc = if pl > p0 { Location::RightEnd } else { Location::LeftEnd };
    let (analytic, tie) = match f.x_stars().first() {
        Some(&x) => {
            let ps = f.p(x).abs();
            let tie = (ps - r * end_max).abs() <= 1e-9 * ps;
            (if ps > r * end_max { Location::Interior } else { end_loc }, tie)
        }
        None => (end_loc, false),
    };
    let by_terms = approximate_tail(b, spec, ApproxOptions::default())?.dominant;
    let agree = analytic == by_terms || (ends_tied && analytic != Location::Interior && by_terms != Location::Interior);
    Ok(DominantLocation { analytic, by_terms, agree, tie, ends_tied, r })
}
