//! Weibull distributions and finite Weibull mixtures.
//!
//! Recovery costs across many tasks tend to be multi-modal, so besides the
//! single-component maximum-likelihood fit this module fits mixtures of
//! Weibull components by expectation-maximization.

mod dist;
mod mixture;
mod mle;

pub use dist::WeibullParams;
pub use mixture::{
    compare_mode_counts, fit_mixture, ks_statistic, log_likelihood, MixtureComponent, MixtureFit,
    MixtureModel,
};
pub use mle::{fit_mle, fit_scale_with_shape, MleFit, SHAPE_BOUNDS};

/// Stopping rules shared by the fitters.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Shape-equation residual bound for the MLE, and relative
    /// log-likelihood change bound for EM.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// EM initializations; the best by final log-likelihood wins.
    pub restarts: usize,
    /// Seeds the jittered EM initializations after the first.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tolerance: 1e-8,
            max_iterations: 500,
            restarts: 5,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(crate::Error::config("fit.tolerance", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(crate::Error::config(
                "fit.max_iterations",
                "must be at least 1",
            ));
        }
        if self.restarts == 0 {
            return Err(crate::Error::config("fit.restarts", "must be at least 1"));
        }
        Ok(())
    }
}

/// Rejects empty input and non-positive or non-finite values.
pub(crate) fn check_samples(samples: &[f64]) -> crate::Result<()> {
    if let Some(bad) = samples.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(crate::Error::Domain(format!(
            "Weibull samples must be positive and finite, got {bad}"
        )));
    }
    Ok(())
}
