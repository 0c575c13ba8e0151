//! Finite Weibull mixtures fitted by expectation-maximization.
//!
//! The E-step assigns each sample a responsibility per component; the M-step
//! sets each weight to its mean responsibility and refits each component by
//! responsibility-weighted maximum likelihood. Both steps maximize exactly,
//! so the log-likelihood never decreases between iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::mle::{ShapeEquation, MIN_SAMPLES};
use super::{check_samples, FitOptions, WeibullParams};
use crate::error::{Error, Result};

/// Tolerance on the sum of mixture weights.
const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Components whose total responsibility falls below this share of the
/// sample keep their previous parameters.
const DEAD_COMPONENT: f64 = 1e-10;

const M_STEP_TOLERANCE: f64 = 1e-12;
const M_STEP_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub params: WeibullParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureModel {
    components: Vec<MixtureComponent>,
}

impl MixtureModel {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Domain(
                "a mixture needs at least one component".into(),
            ));
        }
        if let Some(c) = components.iter().find(|c| !(0.0..=1.0).contains(&c.weight)) {
            return Err(Error::Domain(format!(
                "weight {} is not a probability",
                c.weight
            )));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::Domain(format!("weights sum to {total}, not 1")));
        }
        Ok(MixtureModel { components })
    }

    pub fn single(params: WeibullParams) -> Self {
        MixtureModel {
            components: vec![MixtureComponent {
                weight: 1.0,
                params,
            }],
        }
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.components
            .iter()
            .map(|c| c.params.pdf(x).map(|d| c.weight * d))
            .sum()
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.components
            .iter()
            .map(|c| c.params.cdf(x).map(|p| c.weight * p))
            .sum()
    }

    /// Draws a component by weight, then a value from it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u: f64 = rng.random();
        for c in &self.components {
            if u < c.weight {
                return c.params.sample(rng);
            }
            u -= c.weight;
        }
        self.components[self.components.len() - 1]
            .params
            .sample(rng)
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        if x == 0.0 {
            return self.pdf(0.0).map_or(f64::NAN, f64::ln);
        }
        log_sum_exp(
            self.components
                .iter()
                .map(|c| c.weight.ln() + c.params.ln_pdf(x)),
        )
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let peak = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return peak;
    }
    peak + values.map(|v| (v - peak).exp()).sum::<f64>().ln()
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0_f64, 0.0_f64);
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + carry
}

/// `Σ ln(Σⱼ wⱼ pdf(xᵢ; pⱼ))`
pub fn log_likelihood(samples: &[f64], model: &MixtureModel) -> Result<f64> {
    if let Some(bad) = samples.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Domain(format!(
            "sample {bad} is outside the Weibull support"
        )));
    }
    let mut terms = Vec::with_capacity(samples.len());
    for &x in samples {
        let term = model.ln_pdf(x);
        if !term.is_finite() {
            return Err(Error::Numeric(format!("mixture density at {x} is zero")));
        }
        terms.push(term);
    }
    Ok(compensated_sum(terms.into_iter()))
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and
/// the model CDF, taken over both sides of every step.
pub fn ks_statistic(samples: &[f64], model: &MixtureModel) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("KS statistic of an empty sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = model.cdf(x)?;
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureFit {
    /// Components ordered by increasing scale.
    pub model: MixtureModel,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Which initialization produced this fit.
    pub restart: usize,
    /// Log-likelihood after initialization and after every iteration.
    pub trace: Vec<f64>,
}

impl MixtureFit {
    pub fn n_modes(&self) -> usize {
        self.model.components.len()
    }

    /// Bayesian information criterion; `3m − 1` free parameters.
    pub fn bic(&self, n_samples: usize) -> f64 {
        let free = (3 * self.n_modes() - 1) as f64;
        free * (n_samples as f64).ln() - 2.0 * self.log_likelihood
    }
}

struct Em<'a> {
    samples: &'a [f64],
    ln_x: Vec<f64>,
    sorted: Vec<f64>,
    n_modes: usize,
    opts: &'a FitOptions,
}

impl Em<'_> {
    fn initial(&self, restart: usize) -> Vec<MixtureComponent> {
        let m = self.n_modes;
        let offsets: Vec<f64> = if restart == 0 {
            vec![0.5; m]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
            rng.set_stream(restart as u64);
            (0..m).map(|_| rng.random::<f64>()).collect()
        };
        let last = (self.sorted.len() - 1) as f64;
        offsets
            .iter()
            .enumerate()
            .map(|(j, u)| {
                let q = (j as f64 + u) / m as f64;
                let scale = self.sorted[(q * last).round() as usize];
                MixtureComponent {
                    weight: 1.0 / m as f64,
                    params: WeibullParams { shape: 1.0, scale },
                }
            })
            .collect()
    }

    /// Fills `resp` (row-major, samples × components) and returns the
    /// log-likelihood of `components`.
    fn expectation(&self, components: &[MixtureComponent], resp: &mut [f64]) -> f64 {
        let m = components.len();
        // ln(w k / λ) and ln λ per component; the density then needs one exp
        let consts: Vec<(f64, f64, f64)> = components
            .iter()
            .map(|c| {
                let (k, ln_scale) = (c.params.shape, c.params.scale.ln());
                (c.weight.ln() + k.ln() - ln_scale, ln_scale, k)
            })
            .collect();
        let lls = self.ln_x.iter().enumerate().map(|(i, &ln_x)| {
            let row = &mut resp[i * m..(i + 1) * m];
            for (r, &(offset, ln_scale, k)) in row.iter_mut().zip(&consts) {
                let ln_z = ln_x - ln_scale;
                *r = offset + (k - 1.0) * ln_z - (k * ln_z).exp();
            }
            let peak = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for r in row.iter_mut() {
                *r = (*r - peak).exp();
                total += *r;
            }
            for r in row.iter_mut() {
                *r /= total;
            }
            peak + total.ln()
        });
        compensated_sum(lls.collect::<Vec<_>>().into_iter())
    }

    fn maximization(&self, components: &mut [MixtureComponent], resp: &[f64]) -> Result<()> {
        let m = components.len();
        let n = self.samples.len() as f64;
        let mut column = vec![0.0; self.samples.len()];
        for (j, component) in components.iter_mut().enumerate() {
            for (i, c) in column.iter_mut().enumerate() {
                *c = resp[i * m + j];
            }
            let mass: f64 = column.iter().sum();
            component.weight = mass / n;
            if mass < DEAD_COMPONENT * n {
                continue;
            }
            let equation = ShapeEquation::new(&self.ln_x, Some(&column));
            let (shape, _, _) = equation.solve(
                component.params.shape,
                M_STEP_TOLERANCE,
                M_STEP_ITERATIONS,
                true,
            )?;
            component.params = WeibullParams::new(shape, equation.scale_for(shape))?;
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        for c in components.iter_mut() {
            c.weight /= total;
        }
        Ok(())
    }

    fn run(&self, restart: usize) -> Result<MixtureFit> {
        let mut components = self.initial(restart);
        let mut resp = vec![0.0; self.samples.len() * self.n_modes];
        let mut ll = self.expectation(&components, &mut resp);
        let mut trace = vec![ll];
        let mut converged = false;
        let mut iterations = 0;
        while iterations < self.opts.max_iterations {
            iterations += 1;
            self.maximization(&mut components, &resp)?;
            let next = self.expectation(&components, &mut resp);
            trace.push(next);
            let change = (next - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
            ll = next;
            if change < self.opts.tolerance {
                converged = true;
                break;
            }
        }
        if !ll.is_finite() {
            return Err(Error::Numeric("EM log-likelihood is not finite".into()));
        }
        components.sort_by(|a, b| a.params.scale.total_cmp(&b.params.scale));
        Ok(MixtureFit {
            model: MixtureModel { components },
            log_likelihood: ll,
            iterations,
            converged,
            restart,
            trace,
        })
    }
}

/// Fits an `n_modes`-component Weibull mixture, keeping the best of
/// `opts.restarts` initializations. The first initialization places the
/// component scales at evenly spaced sample quantiles; later ones jitter
/// those positions. Shapes always start at 1.
pub fn fit_mixture(samples: &[f64], n_modes: usize, opts: &FitOptions) -> Result<MixtureFit> {
    opts.validate()?;
    check_samples(samples)?;
    if n_modes == 0 {
        return Err(Error::config("fit.modes", "must be at least 1"));
    }
    let needed = (MIN_SAMPLES * n_modes).max(MIN_SAMPLES);
    if samples.len() < needed {
        return Err(Error::config(
            "fit.modes",
            format!(
                "{n_modes} modes need at least {needed} samples, got {}",
                samples.len()
            ),
        ));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let em = Em {
        samples,
        ln_x: samples.iter().map(|x| x.ln()).collect(),
        sorted,
        n_modes,
        opts,
    };

    let mut best: Option<MixtureFit> = None;
    for restart in 0..opts.restarts {
        let fit = em.run(restart)?;
        if best
            .as_ref()
            .is_none_or(|b| fit.log_likelihood > b.log_likelihood)
        {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Fits 1 through `max_modes` components, skipping counts the sample is too
/// small for.
pub fn compare_mode_counts(
    samples: &[f64],
    max_modes: usize,
    opts: &FitOptions,
) -> Result<Vec<MixtureFit>> {
    (1..=max_modes)
        .filter(|m| samples.len() >= MIN_SAMPLES * m)
        .map(|m| fit_mixture(samples, m, opts))
        .collect()
}
