//! Standard normal density, distribution and Mills-ratio helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Below this point `phi/Phi` switches to the continued-fraction branch.
pub const MILLS_CROSSOVER: f64 = -8.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

#[inline]
pub fn cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Phi(z)`.
#[inline]
pub fn sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// Mills ratio `R(x) = (1 - Phi(x)) / phi(x)` for `x >= 0`, by continued
/// fraction (modified Lentz).
pub fn mills_ratio_cf(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    const TINY: f64 = 1e-300;
    // R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...))))
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..10_000 {
        let a = if j == 1 { 1.0 } else { (j - 1) as f64 };
        d = x + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = x + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}

/// Mills ratio for any `x`, choosing the branch by magnitude.
pub fn mills_ratio(x: f64) -> f64 {
    if x >= -MILLS_CROSSOVER {
        mills_ratio_cf(x)
    } else {
        sf(x) / pdf(x)
    }
}

/// `phi(zeta) / Phi(zeta)`, the inverse Mills ratio of the lower tail.
/// Finite for every finite `zeta` and zero at `+inf`.
pub fn lower_inverse_mills(zeta: f64) -> f64 {
    if zeta == f64::INFINITY {
        0.0
    } else if zeta < MILLS_CROSSOVER {
        1.0 / mills_ratio_cf(-zeta)
    } else {
        pdf(zeta) / cdf(zeta)
    }
}

/// `ln(1 - Phi(z))` without underflow for large `z`.
pub fn ln_sf(z: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        0.0
    } else if z > -MILLS_CROSSOVER {
        ln_pdf(z) + mills_ratio_cf(z).ln()
    } else {
        sf(z).ln()
    }
}
