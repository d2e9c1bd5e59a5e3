//! Empirical checks of posterior contraction: a Metropolis sampler, point
//! estimates, loss-versus-`n` slopes and the Hellinger-to-Voronoi ratio scan.

mod mh;
mod rates;
mod ratio;

pub use mh::{acceptance_probability, effective_sample_size, mh_sample, MhChain, MhConfig, MIN_ACCEPTANCE};
pub use rates::{
    align_gating, fit_slope, median, point_estimate, rate_experiment, tail_fraction, Estimator, EstimatorConfig,
    MedianRow, RatePoint, RateResult, RateSchedule, SlopeFit, Target,
};
pub use ratio::{hellinger_voronoi_ratio_scan, RatioScanConfig, RatioScanRow};

/// Random-walk increment scale is `PROPOSAL_SCALE_CONSTANT / √n` unless set.
pub const PROPOSAL_SCALE_CONSTANT: f64 = 1.5;

pub fn default_proposal_scale(n: usize) -> f64 {
    PROPOSAL_SCALE_CONSTANT / (n.max(1) as f64).sqrt()
}
