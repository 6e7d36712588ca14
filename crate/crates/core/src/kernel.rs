//! Stationary, unit-variance covariance functions.
//!
//! A kernel is usable by the rest of the crate when it satisfies
//!
//! ```text
//! C(0) = 1,  |C(x)| <= 1,
//! C(x) = 1 - Delta x^2 / 2 + A x^4 / 24 - B x^6 + o(x^6),
//! C(lambda x) non-increasing in lambda >= 0,
//! A > Delta^2.
//! ```
//!
//! `Delta` and `A` are the spectral moments `-C''(0)` and `C''''(0)`, i.e. the
//! variances of `xi'` and `xi''`. `B` is kept for diagnostics only.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};

/// Spectral moments of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralMoments {
    pub delta: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

type CovFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum KernelFamily {
    /// `C(x) = exp(-x^2 / (2 l^2))`.
    SquaredExponential,
    /// User-supplied analytic covariance with stated moments.
    CustomAnalytic { name: String, cov: CovFn },
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::SquaredExponential => write!(f, "SquaredExponential"),
            KernelFamily::CustomAnalytic { name, .. } => write!(f, "CustomAnalytic({name})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StationaryKernel {
    family: KernelFamily,
    length_scale: f64,
    moments: SpectralMoments,
}

impl StationaryKernel {
    pub fn squared_exponential(length_scale: f64) -> Result<Self> {
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(Error::InvalidInput(format!("length scale must be positive, got {length_scale}")));
        }
        let l2 = length_scale * length_scale;
        Ok(Self {
            family: KernelFamily::SquaredExponential,
            length_scale,
            moments: SpectralMoments { delta: 1.0 / l2, a: 3.0 / (l2 * l2), b: 1.0 / (48.0 * l2 * l2 * l2) },
        })
    }

    /// Wraps an analytic covariance with user-stated moments. Nothing is
    /// validated here; see [`StationaryKernel::custom_validated`] and
    /// [`check_assumptions`].
    pub fn custom<F>(name: impl Into<String>, cov: F, length_scale: f64, moments: SpectralMoments) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { family: KernelFamily::CustomAnalytic { name: name.into(), cov: Arc::new(cov) }, length_scale, moments }
    }

    /// Like [`StationaryKernel::custom`], but rejects kernels whose stated
    /// `Delta`, `A` disagree with Richardson-extrapolated finite differences
    /// by more than `1e-6` relative, or that fail `A > Delta^2`.
    pub fn custom_validated<F>(
        name: impl Into<String>,
        cov: F,
        length_scale: f64,
        moments: SpectralMoments,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let k = Self::custom(name, cov, length_scale, moments);
        k.spectral_moments()?;
        let (fd_delta, fd_a) = k.fd_spectral_moments();
        let rel = |x: f64, y: f64| ((x - y) / y).abs();
        if rel(fd_delta, moments.delta) > 1e-6 || rel(fd_a, moments.a) > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "stated moments (Delta = {}, A = {}) disagree with finite differences ({fd_delta}, {fd_a})",
                moments.delta, moments.a
            )));
        }
        Ok(k)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn family_name(&self) -> &str {
        match &self.family {
            KernelFamily::SquaredExponential => "squared-exponential",
            KernelFamily::CustomAnalytic { name, .. } => name,
        }
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    #[inline]
    pub fn eval_cov(&self, x: f64) -> f64 {
        match &self.family {
            KernelFamily::SquaredExponential => {
                let t = x / self.length_scale;
                (-0.5 * t * t).exp()
            }
            KernelFamily::CustomAnalytic { cov, .. } => cov(x.abs()),
        }
    }

    /// Stored moments, gated on `A > Delta^2`.
    pub fn spectral_moments(&self) -> Result<SpectralMoments> {
        let m = self.moments;
        if !(m.delta > 0.0) || !(m.a > m.delta * m.delta) {
            return Err(Error::DegenerateKernel { a: m.a, delta_sq: m.delta * m.delta });
        }
        Ok(m)
    }

    /// Moments as stated, without the gate.
    pub fn raw_moments(&self) -> SpectralMoments {
        self.moments
    }

    /// Covariance of `(xi(x), xi'(x), xi''(x))`.
    pub fn joint_deriv_cov(&self) -> Matrix3<f64> {
        let SpectralMoments { delta, a, .. } = self.moments;
        Matrix3::new(1.0, 0.0, -delta, 0.0, delta, 0.0, -delta, 0.0, a)
    }

    /// `-C''(0)` and `C''''(0)` from central stencils with Romberg
    /// extrapolation, independent of the stored moments.
    pub fn fd_spectral_moments(&self) -> (f64, f64) {
        let h0 = 0.2 * self.length_scale;
        let c0 = self.eval_cov(0.0);
        let second = |h: f64| -2.0 * (self.eval_cov(h) - c0) / (h * h);
        let fourth = |h: f64| (2.0 * self.eval_cov(2.0 * h) - 8.0 * self.eval_cov(h) + 6.0 * c0) / h.powi(4);
        (romberg(second, h0, 5), romberg(fourth, h0, 4))
    }
}

/// Richardson table for an even-order O(h^2) estimator.
fn romberg<F: Fn(f64) -> f64>(est: F, h0: f64, levels: usize) -> f64 {
    let mut table: Vec<f64> = (0..levels).map(|i| est(h0 / 2f64.powi(i as i32))).collect();
    for k in 1..levels {
        let factor = 4f64.powi(k as i32);
        for i in (k..levels).rev() {
            table[i] = (factor * table[i] - table[i - 1]) / (factor - 1.0);
        }
    }
    table[levels - 1]
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Lag at which the check was violated most (or closest to violation).
    pub worst_lag: Option<f64>,
    pub worst_violation: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub fitted_delta: f64,
    pub fitted_a: f64,
    pub fd_delta: f64,
    pub fd_a: f64,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Grid diagnostics for A1 (unit variance), A2 (quartic expansion), A3
/// (monotone in the lag) and the `A > Delta^2` gate. The grid holds positive
/// lags; a leading zero is ignored.
pub fn check_assumptions(kernel: &StationaryKernel, grid: &[f64]) -> Result<AssumptionReport> {
    let lags: Vec<f64> = grid.iter().copied().filter(|&x| x > 0.0).collect();
    if lags.len() < 3 || lags.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("need at least three strictly increasing positive lags".into()));
    }
    let m = kernel.raw_moments();
    let mut checks = Vec::with_capacity(4);

    // A1
    let c0 = kernel.eval_cov(0.0);
    let (mut worst, mut worst_lag) = ((c0 - 1.0).abs(), 0.0);
    for &x in &lags {
        let excess = kernel.eval_cov(x).abs() - 1.0;
        if excess > worst {
            worst = excess;
            worst_lag = x;
        }
        let asym = (kernel.eval_cov(-x) - kernel.eval_cov(x)).abs();
        if asym > worst {
            worst = asym;
            worst_lag = x;
        }
    }
    checks.push(AssumptionCheck {
        name: "A1",
        passed: worst <= 1e-12,
        worst_lag: Some(worst_lag),
        worst_violation: worst.max(0.0),
        detail: format!("C(0) = {c0}; max(|C(x)| - 1, |C(x) - C(-x)|) on grid"),
    });

    // A2: exact fit of C(x) - 1 = c2 x^2 + c4 x^4 + c6 x^6 on the three smallest lags
    let xs = [lags[0], lags[1], lags[2]];
    let mat = Matrix3::from_fn(|i, j| xs[i].powi(2 * (j as i32 + 1)));
    let rhs = Vector3::from_fn(|i, _| kernel.eval_cov(xs[i]) - c0);
    let coef =
        mat.lu().solve(&rhs).ok_or_else(|| Error::Numerical("singular system in quartic expansion fit".into()))?;
    let fitted_delta = -2.0 * coef[0];
    let fitted_a = 24.0 * coef[1];
    let d_err = ((fitted_delta - m.delta) / m.delta).abs();
    let a_err = ((fitted_a - m.a) / m.a).abs();
    checks.push(AssumptionCheck {
        name: "A2",
        passed: d_err <= 1e-4 && a_err <= 1e-2,
        worst_lag: Some(xs[0]),
        worst_violation: d_err.max(a_err),
        detail: format!("fitted Delta = {fitted_delta:.10}, A = {fitted_a:.6}"),
    });

    // A3
    let (mut worst, mut worst_lag) = (0.0f64, None);
    let mut prev = c0;
    for &x in &lags {
        let c = kernel.eval_cov(x);
        let rise = c - prev;
        if rise > worst {
            worst = rise;
            worst_lag = Some(x);
        }
        prev = c;
    }
    checks.push(AssumptionCheck {
        name: "A3",
        passed: worst <= 1e-14,
        worst_lag,
        worst_violation: worst,
        detail: "largest increase of C between consecutive lags".into(),
    });

    let gap = m.a - m.delta * m.delta;
    checks.push(AssumptionCheck {
        name: "moment-gate",
        passed: m.delta > 0.0 && gap > 0.0,
        worst_lag: None,
        worst_violation: (-gap).max(0.0),
        detail: format!("A - Delta^2 = {gap}"),
    });

    let (fd_delta, fd_a) = kernel.fd_spectral_moments();
    Ok(AssumptionReport { checks, fitted_delta, fitted_a, fd_delta, fd_a })
}
