use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeibullParams {
    pub shape: f64,
    pub scale: f64,
}

fn check_x(x: f64) -> Result<()> {
    if x >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("Weibull support is x >= 0, got {x}")))
    }
}

impl WeibullParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        let valid = |v: f64| v.is_finite() && v > 0.0;
        if !valid(shape) {
            return Err(Error::Domain(format!(
                "shape must be positive, got {shape}"
            )));
        }
        if !valid(scale) {
            return Err(Error::Domain(format!(
                "scale must be positive, got {scale}"
            )));
        }
        Ok(WeibullParams { shape, scale })
    }

    /// `(k/λ)(x/λ)^(k−1) e^(−(x/λ)^k)`
    pub fn pdf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let k = self.shape;
        let z = x / self.scale;
        if x == 0.0 {
            return Ok(if k < 1.0 {
                f64::INFINITY
            } else if k == 1.0 {
                1.0 / self.scale
            } else {
                0.0
            });
        }
        Ok(k / self.scale * z.powf(k - 1.0) * (-z.powf(k)).exp())
    }

    /// Log-density for `x > 0`.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let k = self.shape;
        let ln_z = (x / self.scale).ln();
        k.ln() - self.scale.ln() + (k - 1.0) * ln_z - (k * ln_z).exp()
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(-(-(x / self.scale).powf(self.shape)).exp_m1())
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.scale * (-(-p).ln_1p()).powf(1.0 / self.shape)
    }

    /// Inverse-CDF sampling, `λ(−ln u)^(1/k)` with `u ∈ (0, 1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                break u;
            }
        };
        self.scale * (-u.ln()).powf(1.0 / self.shape)
    }

    pub fn mean(&self) -> f64 {
        self.scale * gamma(1.0 + 1.0 / self.shape)
    }
}

/// Lanczos approximation, accurate to ~1e-15 for positive arguments.
fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let t = x + G + 0.5;
    let series = COEF[1..]
        .iter()
        .enumerate()
        .fold(COEF[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * series
}
