use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Zero-mean Gaussian priors on gating and regression parameters and an
/// Inverse-Gamma prior on each expert variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    /// Variance of the gating biases and slopes.
    pub gating_var: f64,
    /// Variance of regression slopes.
    pub slope_var: f64,
    /// Variance of regression intercepts.
    pub intercept_var: f64,
    pub sigma2_shape: f64,
    pub sigma2_rate: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            gating_var: 10.0,
            slope_var: 10.0,
            intercept_var: 10.0,
            sigma2_shape: 2.0,
            sigma2_rate: 2.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.gating_var,
            self.slope_var,
            self.intercept_var,
            self.sigma2_shape,
            self.sigma2_rate,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "prior parameters must be positive and finite: {self:?}"
            )))
        }
    }

    /// `log N(v | 0, var)` and its derivative in `v`.
    #[inline]
    pub(crate) fn gaussian(v: f64, var: f64) -> (f64, f64) {
        (
            -0.5 * (std::f64::consts::TAU * var).ln() - v * v / (2.0 * var),
            -v / var,
        )
    }

    /// Log density of `s = log σ²` when `σ² ~ InvGamma(shape, rate)`,
    /// Jacobian included, and its derivative in `s`.
    #[inline]
    pub(crate) fn log_sigma2(&self, s: f64) -> (f64, f64) {
        let (a, b) = (self.sigma2_shape, self.sigma2_rate);
        let be = b * (-s).exp();
        (a * b.ln() - ln_gamma(a) - a * s - be, -a + be)
    }
}
