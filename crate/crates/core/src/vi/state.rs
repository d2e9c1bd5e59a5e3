use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::layout::ParamLayout;
use crate::error::{check_dim, Error, Result};
use crate::model::{ExpertFamily, MixingMeasure, ParamBounds};
use crate::seed;

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7;

/// Mean-field Gaussian `q(θ) = Π N(θ_i | mean_i, exp(log_std_i)²)` over the
/// flat parameter vector described by `layout`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    pub family: ExpertFamily<f64>,
    pub k: usize,
    pub d: usize,
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl VariationalState {
    pub fn new(layout: ParamLayout, mean: Vec<f64>, log_std: Vec<f64>) -> Result<Self> {
        check_dim(layout.len(), mean.len())?;
        check_dim(layout.len(), log_std.len())?;
        if mean.iter().chain(&log_std).any(|v| !v.is_finite()) {
            return Err(Error::Argument("variational parameters must be finite".into()));
        }
        Ok(Self {
            family: layout.family,
            k: layout.k,
            d: layout.d,
            mean,
            log_std,
        })
    }

    /// Means drawn from `N(0, 0.1²)`, all standard deviations `0.1`.
    pub fn init(layout: ParamLayout, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mean = (0..layout.len())
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.1 * z
            })
            .collect();
        let log_std = vec![0.1f64.ln(); layout.len()];
        Self {
            family: layout.family,
            k: layout.k,
            d: layout.d,
            mean,
            log_std,
        }
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.family, self.k, self.d)
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// `θ = mean + ε·std`.
    pub fn reparameterize(&self, eps: &[f64], theta: &mut [f64]) {
        for i in 0..self.mean.len() {
            theta[i] = self.mean[i] + eps[i] * self.log_std[i].exp();
        }
    }

    /// `log q(θ)` for `θ = mean + ε·std`, expressed through `ε`.
    pub fn log_q_eps(&self, eps: &[f64]) -> f64 {
        self.log_std
            .iter()
            .zip(eps)
            .map(|(ls, e)| -HALF_LN_TAU - ls - 0.5 * e * e)
            .sum()
    }

    pub fn log_q(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.len(), theta.len())?;
        Ok(self
            .mean
            .iter()
            .zip(&self.log_std)
            .zip(theta)
            .map(|((m, ls), t)| {
                let e = (t - m) / ls.exp();
                -HALF_LN_TAU - ls - 0.5 * e * e
            })
            .sum())
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + HALF_LN_TAU + 0.5).sum()
    }

    /// Variational means as a mixing measure, `σ² = exp(mean of log σ²)`
    /// clamped into `bounds`.
    pub fn point_estimate(&self, bounds: &ParamBounds<f64>) -> Result<MixingMeasure<f64>> {
        self.layout().to_measure(&self.mean, bounds)
    }
}
