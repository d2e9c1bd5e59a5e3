use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mh::{mh_sample, MhChain, MhConfig};
use crate::divergences::hellinger_sq_mc;
use crate::error::{Error, Result};
use crate::identifiability::{normalize_gating, normalize_gating_at};
use crate::model::{sample_smoge, Dataset, MixingMeasure};
use crate::seed::{self, tag};
use crate::vi::{fit, FitConfig, PriorConfig};
use crate::voronoi::{loss_l1, loss_l2, VoronoiLossReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    ViMean,
    MhPosteriorMean,
}

/// `ExactSpecified` fits `K = K*` and scores with `L1`; `OverSpecified` fits
/// `K > K*` and scores with `L2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    ExactSpecified,
    OverSpecified,
}

impl Target {
    pub fn loss(self, g: &MixingMeasure<f64>, g_star: &MixingMeasure<f64>) -> Result<VoronoiLossReport<f64>> {
        match self {
            Self::ExactSpecified => loss_l1(g, g_star),
            Self::OverSpecified => loss_l2(g, g_star),
        }
    }
}

/// Settings for [`point_estimate`]. The fit seed also seeds the chain via
/// `derive(fit.seed, [MH])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub fit: FitConfig,
    #[serde(default = "default_mh_steps")]
    pub mh_steps: usize,
    /// Defaults to [`super::default_proposal_scale`] of the sample size.
    #[serde(default)]
    pub mh_proposal_scale: Option<f64>,
    /// Independent variational fits; the one with the highest final ELBO is kept.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_restarts() -> usize {
    1
}

fn default_mh_steps() -> usize {
    20_000
}

impl EstimatorConfig {
    pub fn new(fit: FitConfig) -> Self {
        Self {
            fit,
            mh_steps: default_mh_steps(),
            mh_proposal_scale: None,
            restarts: default_restarts(),
        }
    }
}

/// Translates the gating of `g` so the component whose expert block
/// `(β, σ²)` is nearest to that of the last atom of `g_star` carries zero
/// gating parameters. Fitted labels are arbitrary, so this replaces
/// normalizing at the last fitted component when comparing with `g_star`.
pub fn align_gating(g: &MixingMeasure<f64>, g_star: &MixingMeasure<f64>) -> Result<MixingMeasure<f64>> {
    let target = g_star.component(g_star.k() - 1);
    let dist = |j: usize| {
        let c = g.component(j);
        c.beta
            .iter()
            .zip(&target.beta)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            + (c.sigma2 - target.sigma2).powi(2)
    };
    let anchor = (0..g.k()).min_by(|&a, &b| dist(a).total_cmp(&dist(b))).expect("K >= 1");
    normalize_gating_at(g, anchor)
}

pub(crate) fn estimate_with_chain(
    data: &Dataset<f64>,
    k: usize,
    method: Estimator,
    prior: &PriorConfig,
    cfg: &EstimatorConfig,
) -> Result<(MixingMeasure<f64>, Option<MhChain>)> {
    if cfg.restarts == 0 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    let mut vi = fit(data, k, prior, &cfg.fit)?;
    for r in 1..cfg.restarts {
        let mut fc = cfg.fit.clone();
        fc.seed = seed::derive(cfg.fit.seed, &[tag::FIT, r as u64]);
        let other = fit(data, k, prior, &fc)?;
        if other.final_elbo > vi.final_elbo {
            vi = other;
        }
    }
    match method {
        Estimator::ViMean => Ok((normalize_gating(&vi.point_estimate), None)),
        Estimator::MhPosteriorMean => {
            let mh = MhConfig {
                family: cfg.fit.family,
                steps: cfg.mh_steps,
                proposal_scale: cfg
                    .mh_proposal_scale
                    .unwrap_or_else(|| super::default_proposal_scale(data.len())),
                bounds: cfg.fit.bounds,
                seed: seed::derive(cfg.fit.seed, &[tag::MH]),
            };
            let chain = mh_sample(data, k, prior, &mh, Some(&vi.final_state.mean))?;
            let g = chain.layout.to_measure(&chain.posterior_mean(), &cfg.fit.bounds)?;
            Ok((normalize_gating(&g), Some(chain)))
        }
    }
}

/// Point estimate of the mixing measure with normalized gating: the
/// variational means of the best of `restarts` fits (restart `r ≥ 1` uses
/// seed `derive(fit.seed, [FIT, r])`), or the Metropolis posterior mean over the last
/// `⌈steps/2⌉` states of a chain started at the variational means.
pub fn point_estimate(
    data: &Dataset<f64>,
    k: usize,
    method: Estimator,
    prior: &PriorConfig,
    cfg: &EstimatorConfig,
) -> Result<MixingMeasure<f64>> {
    estimate_with_chain(data, k, method, prior, cfg).map(|(g, _)| g)
}

/// Fraction of the kept chain states whose Voronoi loss against `g_star`
/// exceeds `m · √(log n / n)`.
pub fn tail_fraction(
    chain: &MhChain,
    g_star: &MixingMeasure<f64>,
    target: Target,
    n: usize,
    m: f64,
    bounds: &crate::model::ParamBounds<f64>,
) -> Result<f64> {
    let radius = m * ((n as f64).ln() / n as f64).sqrt();
    let kept = chain.kept();
    let mut outside = 0usize;
    for s in kept {
        let g = align_gating(&chain.layout.to_measure(s, bounds)?, g_star)?;
        if target.loss(&g, g_star)?.total > radius {
            outside += 1;
        }
    }
    Ok(outside as f64 / kept.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSchedule {
    pub n_grid: Vec<usize>,
    pub replications_per_n: usize,
    pub target: Target,
    pub estimator: Estimator,
    /// Fitted `K`; defaults to `K*` (exact) or `K* + 1` (over-specified).
    #[serde(default)]
    pub k_fit: Option<usize>,
    /// Fit settings; the seed is replaced per `(n, replication)`.
    pub estimator_cfg: EstimatorConfig,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default = "default_tail_m")]
    pub tail_radius_m: f64,
    #[serde(default)]
    pub prior: PriorConfig,
}

fn default_n_mc() -> usize {
    crate::divergences::DEFAULT_N_MC
}

fn default_tail_m() -> f64 {
    10.0
}

impl RateSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.len() < 3 {
            return Err(Error::Config(format!(
                "n_grid needs at least 3 sample sizes for a slope, got {}",
                self.n_grid.len()
            )));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) || self.n_grid[0] < 2 {
            return Err(Error::Config(
                "n_grid must be strictly increasing and at least 2".into(),
            ));
        }
        if self.replications_per_n == 0 || self.n_mc == 0 {
            return Err(Error::Config("replications and n_mc must be at least 1".into()));
        }
        self.estimator_cfg.fit.validate()?;
        self.prior.validate()
    }

    pub fn k_fit(&self, k_star: usize) -> usize {
        self.k_fit.unwrap_or(match self.target {
            Target::ExactSpecified => k_star,
            Target::OverSpecified => k_star + 1,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub replication: usize,
    /// Hellinger distance, the square root of the Monte Carlo `d_H²`.
    pub hellinger: f64,
    pub hellinger_sq_std_error: f64,
    pub voronoi: f64,
    pub singleton_part: f64,
    pub multi_part: f64,
    pub tail_fraction: Option<f64>,
    pub acceptance_rate: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub std_error: f64,
    pub intercept: f64,
}

/// Least-squares line through `(x, y)`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Argument("slope fit needs at least 3 paired points".into()));
    }
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(SlopeFit {
        slope,
        std_error: (rss / (m - 2.0) / sxx).sqrt(),
        intercept,
    })
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub n: usize,
    pub hellinger: f64,
    pub voronoi: f64,
    pub singleton_part: f64,
    pub multi_part: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub points: Vec<RatePoint>,
    pub medians: Vec<MedianRow>,
    pub hellinger_slope: SlopeFit,
    pub voronoi_slope: SlopeFit,
    /// Present when every median of the part is positive.
    pub singleton_slope: Option<SlopeFit>,
    pub multi_slope: Option<SlopeFit>,
}

fn log_log_slope(ns: &[f64], values: &[f64]) -> Option<SlopeFit> {
    if values.iter().all(|v| *v > 0.0 && v.is_finite()) {
        let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        fit_slope(ns, &ly).ok()
    } else {
        None
    }
}

/// Simulates from `g_star` at each `n`, estimates, and regresses the log
/// median Hellinger distance and Voronoi loss on `log n`.
///
/// Sub-seeds per `(n, r)`: data `derive(seed, [DATA, n, r])`, fit
/// `derive(seed, [FIT, n, r])`, Hellinger `derive(seed, [HELLINGER, n, r])`.
pub fn rate_experiment(schedule: &RateSchedule, g_star: &MixingMeasure<f64>, seed: u64) -> Result<RateResult> {
    schedule.validate()?;
    if !g_star.is_gating_normalized() {
        return Err(Error::Argument("the true measure must have normalized gating".into()));
    }
    let k = schedule.k_fit(g_star.k());
    let jobs: Vec<(usize, usize)> = schedule
        .n_grid
        .iter()
        .flat_map(|&n| (0..schedule.replications_per_n).map(move |r| (n, r)))
        .collect();
    let points: Vec<Result<RatePoint>> = jobs
        .par_iter()
        .map(|&(n, r)| {
            let path = [n as u64, r as u64];
            let data = sample_smoge(g_star, n, seed::derive(seed, &[tag::DATA, path[0], path[1]]));
            let mut ecfg = schedule.estimator_cfg.clone();
            ecfg.fit.seed = seed::derive(seed, &[tag::FIT, path[0], path[1]]);
            let (g, chain) = estimate_with_chain(&data, k, schedule.estimator, &schedule.prior, &ecfg)?;
            let h = hellinger_sq_mc(
                &g,
                g_star,
                schedule.n_mc,
                seed::derive(seed, &[tag::HELLINGER, path[0], path[1]]),
            )?;
            let loss = schedule.target.loss(&align_gating(&g, g_star)?, g_star)?;
            let tail = match &chain {
                Some(c) => Some(tail_fraction(
                    c,
                    g_star,
                    schedule.target,
                    n,
                    schedule.tail_radius_m,
                    &ecfg.fit.bounds,
                )?),
                None => None,
            };
            Ok(RatePoint {
                n,
                replication: r,
                hellinger: h.value.max(0.0).sqrt(),
                hellinger_sq_std_error: h.std_error,
                voronoi: loss.total,
                singleton_part: loss.singleton_part(),
                multi_part: loss.multi_part(),
                tail_fraction: tail,
                acceptance_rate: chain.map(|c| c.acceptance_rate),
            })
        })
        .collect();
    let points: Vec<RatePoint> = points.into_iter().collect::<Result<_>>()?;

    let medians: Vec<MedianRow> = schedule
        .n_grid
        .iter()
        .map(|&n| {
            let at: Vec<&RatePoint> = points.iter().filter(|p| p.n == n).collect();
            let col = |f: fn(&RatePoint) -> f64| median(&at.iter().map(|p| f(p)).collect::<Vec<_>>());
            MedianRow {
                n,
                hellinger: col(|p| p.hellinger),
                voronoi: col(|p| p.voronoi),
                singleton_part: col(|p| p.singleton_part),
                multi_part: col(|p| p.multi_part),
            }
        })
        .collect();
    let ln_n: Vec<f64> = schedule.n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let col = |f: fn(&MedianRow) -> f64| medians.iter().map(f).collect::<Vec<_>>();
    let hellinger_slope = log_log_slope(&ln_n, &col(|m| m.hellinger))
        .ok_or_else(|| Error::Argument("non-positive median Hellinger distance".into()))?;
    let voronoi_slope = log_log_slope(&ln_n, &col(|m| m.voronoi))
        .ok_or_else(|| Error::Argument("non-positive median Voronoi loss".into()))?;
    Ok(RateResult {
        singleton_slope: log_log_slope(&ln_n, &col(|m| m.singleton_part)),
        multi_slope: log_log_slope(&ln_n, &col(|m| m.multi_part)),
        points,
        medians,
        hellinger_slope,
        voronoi_slope,
    })
}
