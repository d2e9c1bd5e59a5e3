use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::model::{ExpertComponent, ExpertFamily, MixingMeasure, ParamBounds};

/// Flat parameter vector layout for a fixed-`K` model:
/// `[α0 (K) | α1 (K·d) | β (K·p) | log σ² (K)]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub family: ExpertFamily<f64>,
    pub k: usize,
    pub d: usize,
    pub p: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Alpha0,
    Alpha1,
    Beta,
    LogSigma2,
}

impl Block {
    pub fn name(self) -> &'static str {
        match self {
            Self::Alpha0 => "alpha0",
            Self::Alpha1 => "alpha1",
            Self::Beta => "beta",
            Self::LogSigma2 => "log_sigma2",
        }
    }
}

impl ParamLayout {
    pub fn new(family: ExpertFamily<f64>, k: usize, d: usize) -> Self {
        Self {
            family,
            k,
            d,
            p: family.param_dim(d),
        }
    }

    pub fn len(&self) -> usize {
        self.k * (2 + self.d + self.p)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn alpha0(&self, j: usize) -> usize {
        j
    }

    #[inline]
    pub fn alpha1(&self, j: usize) -> usize {
        self.k + j * self.d
    }

    #[inline]
    pub fn beta(&self, j: usize) -> usize {
        self.k * (1 + self.d) + j * self.p
    }

    #[inline]
    pub fn log_sigma2(&self, j: usize) -> usize {
        self.k * (1 + self.d + self.p) + j
    }

    pub fn block_of(&self, idx: usize) -> Block {
        if idx < self.k {
            Block::Alpha0
        } else if idx < self.k * (1 + self.d) {
            Block::Alpha1
        } else if idx < self.k * (1 + self.d + self.p) {
            Block::Beta
        } else {
            Block::LogSigma2
        }
    }

    /// Builds the mixing measure `G(θ)` with `σ² = exp(log σ²)` clamped into `bounds`.
    pub fn to_measure(&self, theta: &[f64], bounds: &ParamBounds<f64>) -> Result<MixingMeasure<f64>> {
        check_dim(self.len(), theta.len())?;
        let comps = (0..self.k)
            .map(|j| {
                ExpertComponent::new(
                    theta[self.alpha0(j)],
                    theta[self.alpha1(j)..self.alpha1(j) + self.d].to_vec(),
                    theta[self.beta(j)..self.beta(j) + self.p].to_vec(),
                    bounds.clamp_sigma2(theta[self.log_sigma2(j)].exp()),
                )
            })
            .collect();
        MixingMeasure::new(self.family, self.d, comps)
    }

    /// Inverse of [`ParamLayout::to_measure`] (without clamping).
    pub fn from_measure(g: &MixingMeasure<f64>) -> (Self, Vec<f64>) {
        let layout = Self::new(*g.family(), g.k(), g.dim());
        let mut theta = vec![0.0; layout.len()];
        for (j, c) in g.components().iter().enumerate() {
            theta[layout.alpha0(j)] = c.alpha0;
            theta[layout.alpha1(j)..layout.alpha1(j) + layout.d].copy_from_slice(&c.alpha1);
            theta[layout.beta(j)..layout.beta(j) + layout.p].copy_from_slice(&c.beta);
            theta[layout.log_sigma2(j)] = c.sigma2.ln();
        }
        (layout, theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_tile_the_vector() {
        let l = ParamLayout::new(ExpertFamily::Linear, 3, 2);
        assert_eq!(l.len(), 3 * (2 + 2 + 3));
        assert_eq!(l.block_of(0), Block::Alpha0);
        assert_eq!(l.block_of(l.alpha1(0)), Block::Alpha1);
        assert_eq!(l.block_of(l.beta(2) + 2), Block::Beta);
        assert_eq!(l.block_of(l.len() - 1), Block::LogSigma2);
        assert_eq!(l.log_sigma2(0), l.beta(2) + 3);
    }

    #[test]
    fn measure_round_trip() {
        let l = ParamLayout::new(ExpertFamily::Linear, 2, 1);
        let theta: Vec<f64> = (0..l.len()).map(|i| 0.1 * i as f64 - 0.5).collect();
        let g = l.to_measure(&theta, &ParamBounds::default()).unwrap();
        let (l2, back) = ParamLayout::from_measure(&g);
        assert_eq!(l2, l);
        for (a, b) in theta.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
