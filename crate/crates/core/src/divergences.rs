//! Monte-Carlo estimators of divergences between SMoGE joint densities
//! `g_G(y, x) = f_G(y | x) · U[-1,1]^d(x)`.
//!
//! Hellinger and L1 use mixture importance sampling with proposal
//! `m = ½(f1 + f2)(· | x)`, so every importance weight is bounded by 2.
//! KL samples directly from `g1` and works in log space.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::model::MixingMeasure;
use crate::seed::{self, tag, Rng};

/// Default sample count for pairwise calls.
pub const DEFAULT_N_MC: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DivergenceEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Set when `g2` underflowed to zero at a sample drawn from `g1` (KL only).
    pub infinite: bool,
}

#[derive(Clone, Copy)]
enum Kind {
    HellingerSq,
    L1,
    Kl,
}

#[derive(Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
    infinite: bool,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return Self {
                infinite: self.infinite || other.infinite,
                ..other
            };
        }
        if other.n == 0 {
            return Self {
                infinite: self.infinite || other.infinite,
                ..self
            };
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Self {
            n,
            mean: self.mean + delta * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64,
            infinite: self.infinite || other.infinite,
        }
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

fn draw_response(g: &MixingMeasure<f64>, x: &[f64], rng: &mut Rng) -> f64 {
    let w = g.gate_weights(x).expect("dimension checked");
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut j = w.len() - 1;
    for (i, wi) in w.iter().enumerate() {
        acc += wi;
        if u < acc {
            j = i;
            break;
        }
    }
    let c = g.component(j);
    let eps: f64 = rng.sample(StandardNormal);
    g.family().mean(&c.beta, x) + c.sigma2.sqrt() * eps
}

fn run_shard(kind: Kind, g1: &MixingMeasure<f64>, g2: &MixingMeasure<f64>, n: usize, seed: u64) -> Welford {
    let mut rng = seed::rng(seed);
    let d = g1.dim();
    let mut x = vec![0.0; d];
    let mut acc = Welford::default();
    for _ in 0..n {
        x.iter_mut().for_each(|v| *v = rng.random_range(-1.0..=1.0));
        match kind {
            Kind::Kl => {
                let y = draw_response(g1, &x, &mut rng);
                let l1 = g1.log_conditional_density(y, &x).unwrap();
                let l2 = g2.log_conditional_density(y, &x).unwrap();
                if l2 == f64::NEG_INFINITY {
                    acc.infinite = true;
                    continue;
                }
                acc.push(l1 - l2);
            }
            Kind::HellingerSq | Kind::L1 => {
                let from_first = rng.random_bool(0.5);
                let y = draw_response(if from_first { g1 } else { g2 }, &x, &mut rng);
                let l1 = g1.log_conditional_density(y, &x).unwrap();
                let l2 = g2.log_conditional_density(y, &x).unwrap();
                let lm = crate::scalar::log_sum_exp(&[l1, l2]) - std::f64::consts::LN_2;
                let v = match kind {
                    // (√f1 − √f2)² / m, without the 2 − 2√(f1 f2)/m cancellation
                    Kind::HellingerSq => {
                        let r = (0.5 * (l1 - lm)).exp() - (0.5 * (l2 - lm)).exp();
                        r * r
                    }
                    _ => ((l1 - lm).exp() - (l2 - lm).exp()).abs(),
                };
                // bounded by 2 exactly; strip rounding overshoot
                let v = v.min(2.0);
                acc.push(v);
            }
        }
    }
    acc
}

fn estimate(
    kind: Kind,
    g1: &MixingMeasure<f64>,
    g2: &MixingMeasure<f64>,
    n_mc: usize,
    seed: u64,
    shards: usize,
) -> Result<DivergenceEstimate> {
    if n_mc == 0 {
        return Err(Error::Argument("n_mc must be at least 1".into()));
    }
    if shards == 0 {
        return Err(Error::Argument("shard count must be at least 1".into()));
    }
    check_dim(g1.dim(), g2.dim())?;
    let base = n_mc / shards;
    let extra = n_mc % shards;
    let stats = (0..shards)
        .into_par_iter()
        .map(|s| {
            let n = base + usize::from(s < extra);
            run_shard(kind, g1, g2, n, seed::derive(seed, &[tag::SHARD, s as u64]))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Welford::default(), Welford::merge);
    let value = if stats.infinite { f64::INFINITY } else { stats.mean };
    Ok(DivergenceEstimate {
        value,
        std_error: stats.std_error(),
        n_samples: n_mc,
        seed,
        infinite: stats.infinite,
    })
}

/// Squared Hellinger distance `∫(√g1 − √g2)² ∈ [0, 2]`.
pub fn hellinger_sq_mc(
    g1: &MixingMeasure<f64>,
    g2: &MixingMeasure<f64>,
    n_mc: usize,
    seed: u64,
) -> Result<DivergenceEstimate> {
    estimate(Kind::HellingerSq, g1, g2, n_mc, seed, 1)
}

/// [`hellinger_sq_mc`] split across `shards` independent sub-seeded streams.
pub fn hellinger_sq_mc_sharded(
    g1: &MixingMeasure<f64>,
    g2: &MixingMeasure<f64>,
    n_mc: usize,
    seed: u64,
    shards: usize,
) -> Result<DivergenceEstimate> {
    estimate(Kind::HellingerSq, g1, g2, n_mc, seed, shards)
}

/// `KL(g1 ‖ g2)`, sampling from `g1`.
pub fn kl_mc(g1: &MixingMeasure<f64>, g2: &MixingMeasure<f64>, n_mc: usize, seed: u64) -> Result<DivergenceEstimate> {
    estimate(Kind::Kl, g1, g2, n_mc, seed, 1)
}

pub fn kl_mc_sharded(
    g1: &MixingMeasure<f64>,
    g2: &MixingMeasure<f64>,
    n_mc: usize,
    seed: u64,
    shards: usize,
) -> Result<DivergenceEstimate> {
    estimate(Kind::Kl, g1, g2, n_mc, seed, shards)
}

/// `∫|g1 − g2| ∈ [0, 2]`.
pub fn l1_norm_mc(
    g1: &MixingMeasure<f64>,
    g2: &MixingMeasure<f64>,
    n_mc: usize,
    seed: u64,
) -> Result<DivergenceEstimate> {
    estimate(Kind::L1, g1, g2, n_mc, seed, 1)
}

pub fn l1_norm_mc_sharded(
    g1: &MixingMeasure<f64>,
    g2: &MixingMeasure<f64>,
    n_mc: usize,
    seed: u64,
    shards: usize,
) -> Result<DivergenceEstimate> {
    estimate(Kind::L1, g1, g2, n_mc, seed, shards)
}
