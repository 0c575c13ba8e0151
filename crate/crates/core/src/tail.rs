//! Complementary error function and the one-sided Gaussian tail.
//!
//! Small arguments use the Maclaurin series of `erf`; from `x = 2` on the
//! Laplace continued fraction gives `erfc` directly, so tail values keep
//! full relative precision down to the underflow limit instead of being
//! formed as `1 − cdf`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const SERIES_LIMIT: f64 = 2.0;
const MAX_TERMS: usize = 500;

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/√π · Σ (−1)ⁿ x^(2n+1) / (n! (2n+1))
    let x2 = x * x;
    let mut power = x;
    let mut sum = x;
    for n in 1..MAX_TERMS {
        power *= -x2 / n as f64;
        let term = power / (2 * n + 1) as f64;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * 2.0 / PI.sqrt()
}

/// `erfc(x)` for `x ≥ SERIES_LIMIT`, by modified Lentz evaluation of
/// `erfc(x) = e^(−x²)/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))`.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..MAX_TERMS {
        let a = n as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_LIMIT {
        1.0 - erf_series(x)
    } else if x > 27.3 {
        // below the smallest subnormal
        0.0
    } else {
        erfc_continued_fraction(x)
    }
}

/// `Q(z) = P(Z > z)` for a standard normal `Z`.
pub fn upper_tail(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Solves `upper_tail(z) = p` for `p ∈ (0, 1)`.
///
/// A rational starting point is polished by Newton steps on `ln Q`, which is
/// concave, so the iteration converges monotonically from either side.
pub fn inverse_upper_tail(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    if p == 0.5 {
        return 0.0;
    }
    let q = p.min(1.0 - p);
    let t = (-2.0 * q.ln()).sqrt();
    let approx = t
        - (2.515517 + 0.802853 * t + 0.010328 * t * t)
            / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    let mut z = if p < 0.5 { approx } else { -approx };
    let target = p.ln();
    for _ in 0..50 {
        let tail = upper_tail(z);
        let step = (tail.ln() - target) * tail / normal_pdf(z);
        z += step;
        if step.abs() <= 1e-15 * z.abs().max(1.0) {
            break;
        }
    }
    z
}
