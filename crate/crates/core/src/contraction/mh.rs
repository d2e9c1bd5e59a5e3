use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{Dataset, ExpertFamily, ParamBounds};
use crate::seed::{self, tag};
use crate::vi::{log_joint, Block, ParamLayout, PriorConfig, VariationalState};

/// Chains accepting less often than this are flagged.
pub const MIN_ACCEPTANCE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MhConfig {
    pub family: ExpertFamily<f64>,
    pub steps: usize,
    /// Standard deviation of the Gaussian increment on every coordinate.
    pub proposal_scale: f64,
    #[serde(default)]
    pub bounds: ParamBounds<f64>,
    pub seed: u64,
}

impl MhConfig {
    pub fn new(steps: usize, proposal_scale: f64, seed: u64) -> Self {
        Self {
            family: ExpertFamily::Linear,
            steps,
            proposal_scale,
            bounds: ParamBounds::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("MH steps must be at least 1".into()));
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale.is_finite()) {
            return Err(Error::Config("MH proposal scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MhChain {
    pub layout: ParamLayout,
    /// State after each step; `states.len() == steps`.
    pub states: Vec<Vec<f64>>,
    pub log_posteriors: Vec<f64>,
    pub acceptance_rate: f64,
    /// Acceptance rate below [`MIN_ACCEPTANCE`].
    pub low_acceptance: bool,
}

impl MhChain {
    /// The last `⌈steps / 2⌉` states.
    pub fn kept(&self) -> &[Vec<f64>] {
        let keep = self.states.len().div_ceil(2);
        &self.states[self.states.len() - keep..]
    }

    /// Coordinate-wise mean of [`MhChain::kept`].
    pub fn posterior_mean(&self) -> Vec<f64> {
        let kept = self.kept();
        let mut m = vec![0.0; self.layout.len()];
        for s in kept {
            m.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        }
        m.iter_mut().for_each(|a| *a /= kept.len() as f64);
        m
    }
}

/// Metropolis acceptance probability `min(1, exp(proposal − current))`.
pub fn acceptance_probability(log_current: f64, log_proposal: f64) -> f64 {
    if log_proposal >= log_current {
        1.0
    } else {
        (log_proposal - log_current).exp()
    }
}

fn coordinate_box(layout: &ParamLayout, bounds: &ParamBounds<f64>, i: usize) -> (f64, f64) {
    match layout.block_of(i) {
        Block::Alpha0 => bounds.alpha0,
        Block::Alpha1 => bounds.alpha1,
        Block::Beta => bounds.beta,
        Block::LogSigma2 => (bounds.sigma2.0.ln(), bounds.sigma2.1.ln()),
    }
}

/// Folds `x` back into `[lo, hi]` by mirror reflection at the walls.
fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    if w <= 0.0 {
        return lo;
    }
    let r = (x - lo).rem_euclid(2.0 * w);
    if r <= w {
        lo + r
    } else {
        lo + 2.0 * w - r
    }
}

/// Random-walk Metropolis on `log_joint` inside the parameter box, with
/// Gaussian increments reflected at the walls. Starts from `init` when given
/// (clamped into the box), otherwise from the variational initialization
/// means under `derive(seed, [INIT])`.
pub fn mh_sample(
    data: &Dataset<f64>,
    k: usize,
    prior: &PriorConfig,
    cfg: &MhConfig,
    init: Option<&[f64]>,
) -> Result<MhChain> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::Argument("K must be at least 1".into()));
    }
    let layout = ParamLayout::new(cfg.family, k, data.dim());
    let boxes: Vec<(f64, f64)> = (0..layout.len())
        .map(|i| coordinate_box(&layout, &cfg.bounds, i))
        .collect();
    let mut current: Vec<f64> = match init {
        Some(v) => {
            check_dim(layout.len(), v.len())?;
            v.iter().zip(&boxes).map(|(x, (lo, hi))| x.clamp(*lo, *hi)).collect()
        }
        None => VariationalState::init(layout, seed::derive(cfg.seed, &[tag::INIT])).mean,
    };
    let mut lp = log_joint(&layout, &current, data, prior)?;
    let mut rng = seed::rng(seed::derive(cfg.seed, &[tag::MH]));
    let mut proposal = current.clone();
    let mut states = Vec::with_capacity(cfg.steps);
    let mut log_posteriors = Vec::with_capacity(cfg.steps);
    let mut accepted = 0usize;
    for _ in 0..cfg.steps {
        for i in 0..current.len() {
            let z: f64 = StandardNormal.sample(&mut rng);
            proposal[i] = reflect(current[i] + cfg.proposal_scale * z, boxes[i].0, boxes[i].1);
        }
        let lp_new = log_joint(&layout, &proposal, data, prior)?;
        let u: f64 = rng.random();
        if lp_new.is_finite() && u < acceptance_probability(lp, lp_new) {
            std::mem::swap(&mut current, &mut proposal);
            lp = lp_new;
            accepted += 1;
        }
        states.push(current.clone());
        log_posteriors.push(lp);
    }
    let acceptance_rate = accepted as f64 / cfg.steps as f64;
    Ok(MhChain {
        layout,
        states,
        log_posteriors,
        acceptance_rate,
        low_acceptance: acceptance_rate < MIN_ACCEPTANCE,
    })
}

/// Effective sample size by Geyer's initial positive sequence estimator.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0 = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let rho = |lag: usize| c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / (n as f64 * c0);
    let mut sum = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while 2 * t + 1 < n {
        let pair = if t == 0 {
            1.0 + rho(1)
        } else {
            rho(2 * t) + rho(2 * t + 1)
        };
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        sum += pair;
        prev_pair = pair;
        t += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0);
    n as f64 / tau
}
