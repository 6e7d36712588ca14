//! Moments of a standard normal `Z` conditioned on `Z <= zeta`.
//!
//! All moments follow from the inverse Mills ratio `lambda = phi(zeta) /
//! Phi(zeta)` through
//!
//! ```text
//! m_0 = 1,  m_1 = -lambda,  m_k = (k - 1) m_{k-2} - zeta^{k-1} lambda
//! ```
//!
//! Below `zeta = -8` the ratio comes from the continued fraction of the Mills
//! ratio, so the table stays finite for any finite `zeta`.

use crate::error::{Error, Result};
use crate::normal;

/// Highest moment order kept in the table.
pub const MAX_ORDER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMomentTable {
    pub zeta: f64,
    /// `m[k] = E[Z^k | Z <= zeta]` for `k = 0..=5`.
    pub m: [f64; MAX_ORDER + 1],
}

impl TruncatedMomentTable {
    pub fn new(zeta: f64) -> Result<Self> {
        if zeta.is_nan() || zeta == f64::NEG_INFINITY {
            return Err(Error::InvalidInput(format!("truncation point must be finite or +inf, got {zeta}")));
        }
        let mut m = [0.0; MAX_ORDER + 1];
        if zeta == f64::INFINITY {
            m = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0];
        } else {
            let lambda = normal::lower_inverse_mills(zeta);
            m[0] = 1.0;
            m[1] = -lambda;
            let mut zeta_pow = zeta; // zeta^{k-1}
            for k in 2..=MAX_ORDER {
                m[k] = (k - 1) as f64 * m[k - 2] - zeta_pow * lambda;
                zeta_pow *= zeta;
            }
        }
        Ok(Self { zeta, m })
    }

    /// `E[Z^k | Z <= zeta]`.
    #[inline]
    pub fn moment(&self, k: usize) -> f64 {
        self.m[k]
    }

    /// `E[(x - Z)^k | Z <= zeta]` by binomial expansion.
    pub fn shifted(&self, x: f64, k: usize) -> f64 {
        assert!(k <= MAX_ORDER, "shifted moment order {k} exceeds table");
        let mut sum = 0.0;
        let mut binom = 1.0;
        for j in 0..=k {
            // C(k, j) x^{k-j} (-1)^j m_j
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sum += binom * x.powi((k - j) as i32) * sign * self.m[j];
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
        sum
    }

    /// `E[Z^4 (x - Z) | Z <= zeta] = x m_4 - m_5`.
    #[inline]
    pub fn z4_shifted(&self, x: f64) -> f64 {
        x * self.m[4] - self.m[5]
    }
}

/// Table of `E[Z^k | Z <= zeta]`, `k = 0..=5`.
pub fn trunc_moments(zeta: f64) -> Result<TruncatedMomentTable> {
    TruncatedMomentTable::new(zeta)
}

/// `E[(x - Z)^k | Z <= zeta]` for `k` in `1..=3`.
pub fn shifted_moment(x: f64, zeta: f64, k: usize) -> Result<f64> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidInput(format!("shifted moment order must be 1, 2 or 3, got {k}")));
    }
    Ok(trunc_moments(zeta)?.shifted(x, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeta_zero_first_moment() {
        let t = trunc_moments(0.0).unwrap();
        assert!((t.m[1] + (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((t.m[1] + 0.797_884_6).abs() < 1e-7);
    }

    #[test]
    fn infinite_truncation_gives_unconditional_moments() {
        let t = trunc_moments(f64::INFINITY).unwrap();
        assert_eq!(&t.m[..5], &[1.0, 0.0, 1.0, 0.0, 3.0]);
        let far = trunc_moments(40.0).unwrap();
        for k in 0..=4 {
            assert!((far.m[k] - t.m[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_first_moment_examples() {
        for &z in &[-2.0, 0.3, 4.0] {
            let t = trunc_moments(z).unwrap();
            assert!((shifted_moment(0.0, z, 1).unwrap() + t.m[1]).abs() < 1e-15);
        }
        let v = shifted_moment(1.0, 0.0, 1).unwrap();
        assert!((v - 1.797_884_6).abs() < 1e-7);
        assert!(shifted_moment(1.0, 0.0, 4).is_err());
    }

    #[test]
    fn rejects_minus_infinity_and_nan() {
        assert!(trunc_moments(f64::NEG_INFINITY).is_err());
        assert!(trunc_moments(f64::NAN).is_err());
    }

    #[test]
    fn deep_lower_tail_stays_finite() {
        let t = trunc_moments(-50.0).unwrap();
        assert!(t.m.iter().all(|v| v.is_finite()));
        // conditional law collapses onto zeta
        assert!((t.m[1] + 50.0).abs() < 0.05);
        assert!(t.m[2] > 0.0 && t.m[4] > 0.0);
    }

    proptest! {
        #[test]
        fn recurrence_holds(zeta in -4.0f64..4.0) {
            let t = trunc_moments(zeta).unwrap();
            let lambda = normal::pdf(zeta) / normal::cdf(zeta);
            for k in 2..=4usize {
                let rhs = (k - 1) as f64 * t.m[k - 2] - zeta.powi(k as i32 - 1) * lambda;
                prop_assert!((t.m[k] - rhs).abs() < 1e-12);
            }
        }

        #[test]
        fn first_shifted_moment_positive_right_of_mean(zeta in -6.0f64..6.0, dx in 1e-6f64..3.0) {
            let t = trunc_moments(zeta).unwrap();
            prop_assert!(t.m[1] < 0.0);
            let x = t.m[1].max(0.0) + dx;
            prop_assert!(t.shifted(x, 1) > 0.0);
            prop_assert!(t.shifted(x + 0.1, 1) > t.shifted(x, 1));
        }

        #[test]
        fn even_moments_positive(zeta in -10.0f64..10.0) {
            let t = trunc_moments(zeta).unwrap();
            prop_assert!(t.m[2] > 0.0);
            prop_assert!(t.m[4] > 0.0);
            // variance of the truncated law is positive
            prop_assert!(t.m[2] - t.m[1] * t.m[1] > 0.0);
        }
    }
}
