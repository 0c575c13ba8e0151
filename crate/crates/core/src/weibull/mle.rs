//! Maximum-likelihood Weibull fitting.
//!
//! With the scale profiled out, the shape `k` solves
//!
//! ```text
//! g(k) = Σ wᵢ xᵢᵏ ln xᵢ / Σ wᵢ xᵢᵏ − 1/k − Σ wᵢ ln xᵢ / Σ wᵢ = 0
//! ```
//!
//! and then `λ = (Σ wᵢ xᵢᵏ / Σ wᵢ)^(1/k)`. `g` is strictly increasing in `k`
//! unless all points coincide, so the root is bracketed and Newton steps can
//! fall back to bisection. Sums are formed in the log domain relative to the
//! largest term, which keeps `xᵏ` from overflowing at large shapes and makes
//! the fit exactly equivariant under rescaling of the data.

use serde::Serialize;

use super::{check_samples, FitOptions, WeibullParams};
use crate::error::{Error, Result};

/// Shapes outside this range are treated as degenerate.
pub const SHAPE_BOUNDS: (f64, f64) = (1e-3, 1e3);

pub const MIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleFit {
    pub params: WeibullParams,
    pub log_likelihood: f64,
    /// Shape-equation residual at the returned shape.
    pub residual: f64,
    pub iterations: usize,
}

/// Weighted log-data for the profile shape equation.
pub(crate) struct ShapeEquation<'a> {
    ln_x: &'a [f64],
    /// `ln wᵢ`, or `None` for unit weights. Zero weights map to −∞ and are
    /// skipped.
    ln_w: Option<Vec<f64>>,
    weight_total: f64,
    mean_ln_x: f64,
}

struct Moments {
    residual: f64,
    slope: f64,
    /// `ln Σ wᵢ xᵢᵏ`
    ln_s0: f64,
}

impl<'a> ShapeEquation<'a> {
    pub(crate) fn new(ln_x: &'a [f64], weights: Option<&[f64]>) -> Self {
        let (weight_total, weighted_sum) = match weights {
            Some(w) => w
                .iter()
                .zip(ln_x)
                .fold((0.0, 0.0), |(tw, ts), (w, l)| (tw + w, ts + w * l)),
            None => (ln_x.len() as f64, ln_x.iter().sum()),
        };
        ShapeEquation {
            ln_x,
            ln_w: weights.map(|w| {
                w.iter()
                    .map(|&w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
                    .collect()
            }),
            weight_total,
            mean_ln_x: weighted_sum / weight_total,
        }
    }

    /// `(ln wᵢ, ln xᵢ)` over the points with positive weight.
    fn terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let ln_w = self.ln_w.as_deref();
        self.ln_x
            .iter()
            .enumerate()
            .map(move |(i, &l)| (ln_w.map_or(0.0, |w| w[i]), l))
            .filter(|&(lw, _)| lw > f64::NEG_INFINITY)
    }

    fn moments(&self, k: f64) -> Moments {
        let peak = self
            .terms()
            .map(|(lw, l)| lw + k * l)
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (lw, l) in self.terms() {
            let t = (lw + k * l - peak).exp();
            let d = l - self.mean_ln_x;
            s0 += t;
            s1 += t * d;
            s2 += t * d * d;
        }
        let m1 = s1 / s0;
        Moments {
            residual: m1 - 1.0 / k,
            slope: (s2 / s0 - m1 * m1).max(0.0) + 1.0 / (k * k),
            ln_s0: peak + s0.ln(),
        }
    }

    pub(crate) fn scale_for(&self, k: f64) -> f64 {
        ((self.moments(k).ln_s0 - self.weight_total.ln()) / k).exp()
    }

    /// Root of the shape equation inside [`SHAPE_BOUNDS`]. With `clamp`, a
    /// root beyond a bound is replaced by that bound, which is the
    /// constrained maximizer since the profile likelihood is unimodal.
    ///
    /// The residual at a bound is only evaluated once a Newton step heads
    /// past it.
    pub(crate) fn solve(
        &self,
        start: f64,
        tolerance: f64,
        max_iterations: usize,
        clamp: bool,
    ) -> Result<(f64, f64, usize)> {
        let (lower, upper) = SHAPE_BOUNDS;
        let at_bound = |k: f64, residual: f64, iteration: usize| {
            if clamp {
                Ok((k, residual, iteration))
            } else if k == lower {
                Err(Error::DegenerateData(format!(
                    "shape estimate below {lower}"
                )))
            } else {
                Err(Error::DegenerateData(format!(
                    "shape estimate above {upper}"
                )))
            }
        };
        let (mut lo, mut hi) = (lower, upper);
        // whether the residual is known to change sign inside [lo, hi] at each end
        let (mut lo_known, mut hi_known) = (false, false);
        let mut k = start.clamp(lo, hi);
        for iteration in 1..=max_iterations {
            let m = self.moments(k);
            if m.residual.abs() < tolerance {
                return Ok((k, m.residual, iteration));
            }
            if (k == lower && m.residual > 0.0) || (k == upper && m.residual < 0.0) {
                return at_bound(k, m.residual, iteration);
            }
            if m.residual < 0.0 {
                lo = k;
                lo_known = true;
            } else {
                hi = k;
                hi_known = true;
            }
            if hi / lo - 1.0 < 4.0 * f64::EPSILON {
                return Ok((k, m.residual, iteration));
            }
            let newton = k - m.residual / m.slope;
            if newton >= hi && !hi_known {
                let residual = self.moments(upper).residual;
                if residual <= 0.0 {
                    return at_bound(upper, residual, iteration);
                }
                hi_known = true;
            } else if newton <= lo && !lo_known {
                let residual = self.moments(lower).residual;
                if residual >= 0.0 {
                    return at_bound(lower, residual, iteration);
                }
                lo_known = true;
            }
            k = if newton > lo && newton < hi {
                newton
            } else {
                (lo * hi).sqrt()
            };
        }
        Err(Error::Numeric(format!(
            "shape equation did not converge in {max_iterations} iterations"
        )))
    }
}

fn log_likelihood(samples: &[f64], params: &WeibullParams) -> f64 {
    samples.iter().map(|&x| params.ln_pdf(x)).sum()
}

fn check_fit_input(samples: &[f64]) -> Result<()> {
    check_samples(samples)?;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::DegenerateData(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    Ok(())
}

pub fn fit_mle(samples: &[f64], opts: &FitOptions) -> Result<MleFit> {
    opts.validate()?;
    check_fit_input(samples)?;
    let first = samples[0];
    if samples.iter().all(|&x| x == first) {
        return Err(Error::DegenerateData(
            "all samples are equal; the shape diverges".into(),
        ));
    }
    let ln_x: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let equation = ShapeEquation::new(&ln_x, None);
    let (shape, residual, iterations) =
        equation.solve(1.0, opts.tolerance, opts.max_iterations, false)?;
    let params = WeibullParams::new(shape, equation.scale_for(shape))?;
    Ok(MleFit {
        params,
        log_likelihood: log_likelihood(samples, &params),
        residual,
        iterations,
    })
}

/// Scale MLE for a fixed shape: `λ = (Σ xᵢᵏ / n)^(1/k)`.
pub fn fit_scale_with_shape(samples: &[f64], shape: f64) -> Result<WeibullParams> {
    check_samples(samples)?;
    if samples.is_empty() {
        return Err(Error::DegenerateData("no samples".into()));
    }
    WeibullParams::new(shape, 1.0)?;
    let ln_x: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    WeibullParams::new(shape, ShapeEquation::new(&ln_x, None).scale_for(shape))
}
