//! The Dirichlet problem `(a v')' = p`, `v(0) = v(L) = 0`, with
//! `a = exp(-sigma xi)`.
//!
//! Its strain has the closed form
//!
//! ```text
//! v'(x) = e^{sigma xi(x)} [ F(x) - int F e^{sigma xi} / int e^{sigma xi} ],   F(x) = int_0^x p
//! ```
//!
//! evaluated here with the trapezoid rule on the path grid. A conservative
//! finite-volume discretization of the equation itself serves as an
//! independent check.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Grid, PathSample};
use crate::kernel::StationaryKernel;
use crate::optimize::{brent_root, golden_max, Maximum};
use crate::quadrature::{integrate, trapezoid_weights, Tolerance};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Named forcing families. `p`, `p'` and `p''` are exact for each.
#[derive(Clone)]
pub enum ForcingKind {
    Constant {
        p0: f64,
    },
    /// `base + amplitude * exp(-(x - center)^2 / (2 width^2))`
    GaussianBump {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `base + amplitude * cos(pi (x - center) / width)`
    CosineBump {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Arbitrary smooth forcing; `F` is obtained by adaptive quadrature.
    Custom {
        name: String,
        p: ScalarFn,
        dp: ScalarFn,
        d2p: ScalarFn,
    },
}

impl fmt::Debug for ForcingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForcingKind::Constant { p0 } => write!(f, "Constant({p0})"),
            ForcingKind::GaussianBump { base, amplitude, center, width } => {
                write!(f, "GaussianBump(base={base}, amplitude={amplitude}, center={center}, width={width})")
            }
            ForcingKind::CosineBump { base, amplitude, center, width } => {
                write!(f, "CosineBump(base={base}, amplitude={amplitude}, center={center}, width={width})")
            }
            ForcingKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl ForcingKind {
    pub fn custom<P, D, D2>(name: impl Into<String>, p: P, dp: D, d2p: D2) -> Self
    where
        P: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ForcingKind::Custom { name: name.into(), p: Arc::new(p), dp: Arc::new(dp), d2p: Arc::new(d2p) }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        match *self {
            ForcingKind::Constant { p0 } if !p0.is_finite() => bad("constant forcing must be finite"),
            ForcingKind::GaussianBump { base, amplitude, center, width }
            | ForcingKind::CosineBump { base, amplitude, center, width } => {
                if ![base, amplitude, center, width].iter().all(|v| v.is_finite()) {
                    bad("forcing parameters must be finite")
                } else if !(width > 0.0) {
                    bad("forcing width must be positive")
                } else if amplitude == 0.0 {
                    bad("zero-amplitude bump; use constant forcing")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Which case of the forcing assumption applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForcingCase {
    /// `|p|` has its global maximum at one or more points, with strong
    /// concavity at interior maximizers.
    InteriorMax,
    Constant,
}

/// A forcing family on `[0, L]` with its maximizer analysis.
#[derive(Debug, Clone)]
pub struct ForcingProfile {
    kind: ForcingKind,
    length: f64,
    case: ForcingCase,
    /// Interior global maximizers of `|p|`.
    x_stars: Vec<f64>,
    /// Whether a global maximizer of `|p|` sits at 0 or L.
    boundary_max: bool,
}

const SCAN_POINTS: usize = 4001;

impl ForcingProfile {
    pub fn new(kind: ForcingKind, length: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidInput(format!("domain length must be positive, got {length}")));
        }
        kind.validate()?;
        let mut profile = Self { kind, length, case: ForcingCase::Constant, x_stars: Vec::new(), boundary_max: false };
        if matches!(profile.kind, ForcingKind::Constant { .. }) {
            return Ok(profile);
        }
        profile.case = ForcingCase::InteriorMax;
        let (stars, boundary) = profile.find_maximizers();
        profile.x_stars = stars;
        profile.boundary_max = boundary;
        profile.check_concavity()?;
        Ok(profile)
    }

    /// Overrides the detected maximizer with a user-supplied one, which must
    /// be an interior global maximizer of `|p|`.
    pub fn with_x_star(mut self, x_star: f64) -> Result<Self> {
        if self.case == ForcingCase::Constant {
            return Err(Error::InvalidInput("x_star is not allowed for constant forcing".into()));
        }
        if !(x_star > 0.0 && x_star < self.length) {
            return Err(Error::Assumption(format!("x_star = {x_star} is not interior to (0, {})", self.length)));
        }
        let peak = self.abs_max_on_scan();
        if self.p(x_star).abs() < peak * (1.0 - 1e-8) {
            return Err(Error::Assumption(format!("|p(x_star)| = {} is below max |p| = {peak}", self.p(x_star).abs())));
        }
        self.x_stars = vec![x_star];
        self.boundary_max = false;
        self.check_concavity()?;
        Ok(self)
    }

    fn abs_max_on_scan(&self) -> f64 {
        (0..SCAN_POINTS).map(|i| self.p(self.length * i as f64 / (SCAN_POINTS - 1) as f64).abs()).fold(0.0, f64::max)
    }

    fn find_maximizers(&self) -> (Vec<f64>, bool) {
        let h = self.length / (SCAN_POINTS - 1) as f64;
        let vals: Vec<f64> = (0..SCAN_POINTS).map(|i| self.p(i as f64 * h).abs()).collect();
        let peak = vals.iter().cloned().fold(0.0, f64::max);
        let mut found: Vec<(f64, f64)> = Vec::new();
        for i in 0..SCAN_POINTS {
            let left = if i > 0 { vals[i - 1] } else { f64::NEG_INFINITY };
            let right = if i + 1 < SCAN_POINTS { vals[i + 1] } else { f64::NEG_INFINITY };
            if vals[i] >= left && vals[i] >= right && vals[i] >= peak * (1.0 - 1e-3) {
                let lo = ((i as f64 - 1.0) * h).max(0.0);
                let hi = ((i as f64 + 1.0) * h).min(self.length);
                let mut m = golden_max(|x| self.p(x).abs(), lo, hi, 1e-12 * self.length);
                // a flat maximum only pins x to sqrt(eps); polish on p' = 0
                if self.dp(lo) * self.dp(hi) < 0.0 {
                    if let Ok(x) = brent_root(|x| self.dp(x), lo, hi, 1e-15 * self.length, 200) {
                        if self.p(x).abs() >= m.value {
                            m = Maximum { x, value: self.p(x).abs() };
                        }
                    }
                }
                found.push((m.x, m.value));
            }
        }
        let best = found.iter().map(|f| f.1).fold(0.0, f64::max);
        let mut stars: Vec<f64> = Vec::new();
        let mut boundary = false;
        let edge = 1e-9 * self.length;
        for (x, v) in found {
            if v < best * (1.0 - 1e-10) {
                continue;
            }
            if x <= edge || x >= self.length - edge {
                boundary = true;
            } else if stars.iter().all(|&s| (s - x).abs() > 1e-6 * self.length) {
                stars.push(x);
            }
        }
        (stars, boundary)
    }

    fn check_concavity(&self) -> Result<()> {
        for &x in &self.x_stars {
            let curvature = self.p(x).signum() * self.d2p(x);
            if !(curvature < 0.0) {
                return Err(Error::Assumption(format!(
                    "|p| is not strongly concave at x* = {x}: sign(p) p'' = {curvature}"
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &ForcingKind {
        &self.kind
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn case(&self) -> ForcingCase {
        self.case
    }

    pub fn x_stars(&self) -> &[f64] {
        &self.x_stars
    }

    pub fn has_boundary_max(&self) -> bool {
        self.boundary_max
    }

    pub fn p(&self, x: f64) -> f64 {
        match &self.kind {
            ForcingKind::Constant { p0 } => *p0,
            ForcingKind::GaussianBump { base, amplitude, center, width } => {
                let t = (x - center) / width;
                base + amplitude * (-0.5 * t * t).exp()
            }
            ForcingKind::CosineBump { base, amplitude, center, width } => {
                base + amplitude * (PI * (x - center) / width).cos()
            }
            ForcingKind::Custom { p, .. } => p(x),
        }
    }

    pub fn dp(&self, x: f64) -> f64 {
        match &self.kind {
            ForcingKind::Constant { .. } => 0.0,
            ForcingKind::GaussianBump { amplitude, center, width, .. } => {
                let t = (x - center) / width;
                -amplitude * t / width * (-0.5 * t * t).exp()
            }
            ForcingKind::CosineBump { amplitude, center, width, .. } => {
                let k = PI / width;
                -amplitude * k * (k * (x - center)).sin()
            }
            ForcingKind::Custom { dp, .. } => dp(x),
        }
    }

    pub fn d2p(&self, x: f64) -> f64 {
        match &self.kind {
            ForcingKind::Constant { .. } => 0.0,
            ForcingKind::GaussianBump { amplitude, center, width, .. } => {
                let t = (x - center) / width;
                amplitude * (t * t - 1.0) / (width * width) * (-0.5 * t * t).exp()
            }
            ForcingKind::CosineBump { amplitude, center, width, .. } => {
                let k = PI / width;
                -amplitude * k * k * (k * (x - center)).cos()
            }
            ForcingKind::Custom { d2p, .. } => d2p(x),
        }
    }

    /// `F(x) = int_0^x p(t) dt`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        match &self.kind {
            ForcingKind::Constant { p0 } => p0 * x,
            ForcingKind::GaussianBump { base, amplitude, center, width } => {
                let s = width * std::f64::consts::SQRT_2;
                base * x
                    + amplitude * width * (PI / 2.0).sqrt() * (libm::erf((x - center) / s) - libm::erf(-center / s))
            }
            ForcingKind::CosineBump { base, amplitude, center, width } => {
                let k = PI / width;
                base * x + amplitude / k * ((k * (x - center)).sin() - (-k * center).sin())
            }
            ForcingKind::Custom { p, .. } => {
                let p = Arc::clone(p);
                integrate(move |t| p(t), 0.0, x, Tolerance::new(1e-14, 1e-13)).map(|r| r.value).unwrap_or(f64::NAN)
            }
        }
    }
}

/// Full model: domain, noise amplitude, kernel and forcing.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub length: f64,
    /// Noise amplitude; zero gives a deterministic coefficient.
    pub sigma: f64,
    pub kernel: StationaryKernel,
    pub forcing: ForcingProfile,
}

impl ProblemSpec {
    pub fn new(length: f64, sigma: f64, kernel: StationaryKernel, forcing: ForcingProfile) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidInput(format!("domain length must be positive, got {length}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma must be non-negative, got {sigma}")));
        }
        if (forcing.length() - length).abs() > 1e-12 * length {
            return Err(Error::InvalidInput("forcing profile was built for a different domain length".into()));
        }
        Ok(Self { length, sigma, kernel, forcing })
    }

    pub fn grid(&self, intervals: usize) -> Result<Grid> {
        Grid::uniform(self.length, intervals)
    }

    /// Same model with `p` replaced by `-p`.
    pub fn negated(&self) -> Result<Self> {
        let kind = match self.forcing.kind().clone() {
            ForcingKind::Constant { p0 } => ForcingKind::Constant { p0: -p0 },
            ForcingKind::GaussianBump { base, amplitude, center, width } => {
                ForcingKind::GaussianBump { base: -base, amplitude: -amplitude, center, width }
            }
            ForcingKind::CosineBump { base, amplitude, center, width } => {
                ForcingKind::CosineBump { base: -base, amplitude: -amplitude, center, width }
            }
            ForcingKind::Custom { name, p, dp, d2p } => ForcingKind::Custom {
                name,
                p: Arc::new(move |x| -p(x)),
                dp: Arc::new(move |x| -dp(x)),
                d2p: Arc::new(move |x| -d2p(x)),
            },
        };
        let mut forcing = ForcingProfile::new(kind, self.length)?;
        if !self.forcing.x_stars().is_empty() && self.forcing.x_stars().len() == 1 {
            forcing = forcing.with_x_star(self.forcing.x_stars()[0])?;
        }
        Self::new(self.length, self.sigma, self.kernel.clone(), forcing)
    }
}

/// Strain evaluation on a fixed grid, with `F` tabulated once.
#[derive(Debug, Clone)]
pub struct StrainEvaluator {
    sigma: f64,
    grid: Arc<Grid>,
    f_values: Vec<f64>,
    weights: Vec<f64>,
}

/// Relative tolerance under which two strain magnitudes count as tied.
const TIE_RTOL: f64 = 1e-12;

impl StrainEvaluator {
    pub fn new(spec: &ProblemSpec, grid: Arc<Grid>) -> Result<Self> {
        if (grid.length() - spec.length).abs() > 1e-12 * spec.length {
            return Err(Error::InvalidGrid(format!(
                "grid ends at {}, domain length is {}",
                grid.length(),
                spec.length
            )));
        }
        let f_values = grid.points().iter().map(|&x| spec.forcing.antiderivative(x)).collect();
        let weights = trapezoid_weights(grid.points());
        Ok(Self { sigma: spec.sigma, grid, f_values, weights })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f_values
    }

    /// `max F - min F` over the grid nodes.
    pub fn f_oscillation(&self) -> f64 {
        let (lo, hi) =
            self.f_values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &f| (lo.min(f), hi.max(f)));
        hi - lo
    }

    /// `int F e^{sigma xi} / int e^{sigma xi}`, computed with the exponent
    /// shifted by `max xi`.
    pub fn weighted_mean_f(&self, xi: &[f64]) -> f64 {
        let top = xi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for ((&w, &f), &x) in self.weights.iter().zip(&self.f_values).zip(xi) {
            let e = w * (self.sigma * (x - top)).exp();
            num += e * f;
            den += e;
        }
        num / den
    }

    pub fn strain(&self, xi: &[f64]) -> Vec<f64> {
        let c = self.weighted_mean_f(xi);
        xi.iter().zip(&self.f_values).map(|(&x, &f)| (self.sigma * x).exp() * (f - c)).collect()
    }

    /// `(max |v'|, node index)`; near-ties go to the smallest `x`.
    pub fn max_abs_strain_index(&self, xi: &[f64]) -> (f64, usize) {
        let c = self.weighted_mean_f(xi);
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, (&x, &f)) in xi.iter().zip(&self.f_values).enumerate() {
            let s = ((self.sigma * x).exp() * (f - c)).abs();
            if s > best.0 * (1.0 + TIE_RTOL) {
                best = (s, i);
            }
        }
        best
    }

    pub fn max_abs_strain(&self, xi: &[f64]) -> (f64, f64) {
        let (v, i) = self.max_abs_strain_index(xi);
        (v, self.grid.points()[i])
    }
}

/// Nodal solution `v` and strain `v'`.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub v_prime: Vec<f64>,
}

impl Solution {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,v,v_prime")?;
        for i in 0..self.x.len() {
            writeln!(out, "{},{},{}", self.x[i], self.v[i], self.v_prime[i])?;
        }
        Ok(())
    }
}

fn check_path(spec: &ProblemSpec, path: &PathSample) -> Result<()> {
    if path.values.len() != path.grid.len() {
        return Err(Error::InvalidInput("path values and grid differ in length".into()));
    }
    if path.grid.len() < 3 {
        return Err(Error::InvalidGrid("need at least three grid nodes".into()));
    }
    if (path.grid.length() - spec.length).abs() > 1e-12 * spec.length {
        return Err(Error::InvalidGrid(format!(
            "path grid ends at {}, domain length is {}",
            path.grid.length(),
            spec.length
        )));
    }
    Ok(())
}

/// `(x_i, v'(x_i))` from the closed form.
pub fn strain_closed_form(spec: &ProblemSpec, path: &PathSample) -> Result<Vec<(f64, f64)>> {
    check_path(spec, path)?;
    let eval = StrainEvaluator::new(spec, Arc::clone(&path.grid))?;
    Ok(path.grid.points().iter().copied().zip(eval.strain(&path.values)).collect())
}

/// Closed-form strain plus `v` by cumulative trapezoid integration.
pub fn solution_closed_form(spec: &ProblemSpec, path: &PathSample) -> Result<Solution> {
    check_path(spec, path)?;
    let eval = StrainEvaluator::new(spec, Arc::clone(&path.grid))?;
    let x = path.grid.points().to_vec();
    let v_prime = eval.strain(&path.values);
    let mut v = vec![0.0; x.len()];
    for i in 1..x.len() {
        v[i] = v[i - 1] + 0.5 * (x[i] - x[i - 1]) * (v_prime[i] + v_prime[i - 1]);
    }
    Ok(Solution { x, v, v_prime })
}

/// `(max |v'|, location)` over the grid, ties to the smallest `x`.
pub fn max_abs_strain(spec: &ProblemSpec, path: &PathSample) -> Result<(f64, f64)> {
    check_path(spec, path)?;
    let eval = StrainEvaluator::new(spec, Arc::clone(&path.grid))?;
    Ok(eval.max_abs_strain(&path.values))
}

/// Solves the boundary value problem by a conservative finite-volume scheme
/// with face coefficients `exp(-sigma (xi_i + xi_{i+1}) / 2)` and returns
/// `v` with second-order nodal derivatives.
pub fn solve_fd_oracle(spec: &ProblemSpec, path: &PathSample) -> Result<Solution> {
    check_path(spec, path)?;
    let x = path.grid.points();
    let xi = &path.values;
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let face: Vec<f64> = xi.windows(2).map(|w| (-spec.sigma * 0.5 * (w[0] + w[1])).exp()).collect();
    if face.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::Numerical("face coefficient overflowed".into()));
    }

    // tridiagonal system for v_1..v_{n-2}
    let m = n - 2;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for k in 0..m {
        let i = k + 1;
        let cl = face[i - 1] / h[i - 1];
        let cr = face[i] / h[i];
        let vol = 0.5 * (h[i - 1] + h[i]);
        lower[k] = cl;
        diag[k] = -(cl + cr);
        upper[k] = cr;
        rhs[k] = spec.forcing.p(x[i]) * vol;
    }
    // Thomas algorithm
    for k in 1..m {
        let w = lower[k] / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        rhs[k] -= w * rhs[k - 1];
        if diag[k] == 0.0 || !diag[k].is_finite() {
            return Err(Error::Numerical("singular tridiagonal system".into()));
        }
    }
    let mut v = vec![0.0; n];
    if m > 0 {
        v[m] = rhs[m - 1] / diag[m - 1];
        for k in (0..m - 1).rev() {
            v[k + 1] = (rhs[k] - upper[k] * v[k + 2]) / diag[k];
        }
    }

    let mut v_prime = vec![0.0; n];
    for i in 1..n - 1 {
        let (a, b) = (h[i - 1], h[i]);
        v_prime[i] = -b / (a * (a + b)) * v[i - 1] + (b - a) / (a * b) * v[i] + a / (b * (a + b)) * v[i + 1];
    }
    let (a, b) = (h[0], h[1]);
    v_prime[0] = -(2.0 * a + b) / (a * (a + b)) * v[0] + (a + b) / (a * b) * v[1] - a / (b * (a + b)) * v[2];
    let (a, b) = (h[n - 2], h[n - 3]);
    v_prime[n - 1] =
        (2.0 * a + b) / (a * (a + b)) * v[n - 1] - (a + b) / (a * b) * v[n - 2] + a / (b * (a + b)) * v[n - 3];
    Ok(Solution { x: x.to_vec(), v, v_prime })
}
