use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::elbo::{elbo_estimate, Workspace};
use super::layout::ParamLayout;
use super::prior::PriorConfig;
use super::state::VariationalState;
use crate::error::{check_dim, Error, Result};
use crate::model::{Dataset, ExpertFamily, MixingMeasure, ParamBounds};
use crate::seed::{self, tag};

/// Step-size rule for Adam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearningRate {
    Constant {
        rate: f64,
    },
    /// Geometric decay from `initial` at the first step to `last` at the final step.
    Exponential {
        initial: f64,
        last: f64,
    },
}

impl LearningRate {
    pub fn constant(rate: f64) -> Self {
        Self::Constant { rate }
    }

    pub fn at(&self, step: usize, iterations: usize) -> f64 {
        match *self {
            Self::Constant { rate } => rate,
            Self::Exponential { initial, last } => {
                if iterations <= 1 {
                    initial
                } else {
                    initial * (last / initial).powf(step as f64 / (iterations - 1) as f64)
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Constant { rate } => rate > 0.0 && rate.is_finite(),
            Self::Exponential { initial, last } => {
                initial > 0.0 && last > 0.0 && initial.is_finite() && last.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "learning rate must be positive and finite: {self:?}"
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub family: ExpertFamily<f64>,
    pub iterations: usize,
    pub learning_rate: LearningRate,
    #[serde(default = "one")]
    pub mc_samples_per_step: usize,
    #[serde(default = "two_hundred")]
    pub final_elbo_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub bounds: ParamBounds<f64>,
}

fn one() -> usize {
    1
}

fn two_hundred() -> usize {
    200
}

impl FitConfig {
    pub fn new(iterations: usize, learning_rate: LearningRate, seed: u64) -> Self {
        Self {
            family: ExpertFamily::Linear,
            iterations,
            learning_rate,
            mc_samples_per_step: 1,
            final_elbo_samples: 200,
            seed,
            adam: AdamConfig::default(),
            bounds: ParamBounds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.mc_samples_per_step == 0 || self.final_elbo_samples == 0 {
            return Err(Error::Config("Monte Carlo sample counts must be at least 1".into()));
        }
        if let ExpertFamily::Constant { level } = self.family {
            if !level.is_finite() {
                return Err(Error::Config("constant expert level must be finite".into()));
            }
        }
        self.learning_rate.validate()?;
        self.adam.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub final_state: VariationalState,
    pub elbo_trace: Vec<f64>,
    pub final_elbo: f64,
    pub final_elbo_std_error: f64,
    pub point_estimate: MixingMeasure<f64>,
}

/// Fits a `K`-expert model by maximizing the ELBO with Adam.
///
/// Sub-seeds: initialization `derive(seed, [INIT])`, per-step draws from one
/// stream `derive(seed, [STEPS])`, final ELBO `derive(seed, [FINAL_ELBO])`.
pub fn fit(data: &Dataset<f64>, k: usize, prior: &PriorConfig, cfg: &FitConfig) -> Result<FitResult> {
    if k == 0 {
        return Err(Error::Argument("K must be at least 1".into()));
    }
    cfg.validate()?;
    prior.validate()?;
    if data.is_empty() {
        return Err(Error::Argument("cannot fit an empty dataset".into()));
    }
    let layout = ParamLayout::new(cfg.family, k, data.dim());
    let mut q = VariationalState::init(layout, seed::derive(cfg.seed, &[tag::INIT]));
    fit_from(data, &mut q, prior, cfg)
}

/// Like [`fit`] but starting from the supplied variational state.
pub fn fit_from(
    data: &Dataset<f64>,
    q: &mut VariationalState,
    prior: &PriorConfig,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let layout = q.layout();
    check_dim(layout.d, data.dim())?;
    let n = layout.len();
    let mut ws = Workspace::new(layout);
    let mut rng = seed::rng(seed::derive(cfg.seed, &[tag::STEPS]));
    let mut adam_mean = Adam::new(cfg.adam, n);
    let mut adam_std = Adam::new(cfg.adam, n);
    let mut d_mean = vec![0.0; n];
    let mut d_log_std = vec![0.0; n];
    let mut trace = Vec::with_capacity(cfg.iterations);
    let s = cfg.mc_samples_per_step;
    let w = 1.0 / s as f64;

    for it in 0..cfg.iterations {
        d_mean.iter_mut().for_each(|v| *v = 0.0);
        d_log_std.iter_mut().for_each(|v| *v = 0.0);
        let mut value = 0.0;
        for _ in 0..s {
            value += w * ws.sample(q, data, prior, &mut rng, Some((&mut d_mean, &mut d_log_std, w)));
        }
        let bad_grad = d_mean.iter().chain(&d_log_std).position(|v| !v.is_finite());
        if !value.is_finite() || bad_grad.is_some() {
            let block = ws
                .offending_index()
                .or(bad_grad.map(|i| i % n))
                .map(|i| layout.block_of(i).name())
                .unwrap_or("likelihood");
            return Err(Error::NonFinite {
                iteration: it,
                block: block.to_string(),
            });
        }
        trace.push(value);
        let lr = cfg.learning_rate.at(it, cfg.iterations);
        adam_mean.step(&mut q.mean, &d_mean, lr);
        adam_std.step(&mut q.log_std, &d_log_std, lr);
    }

    let fin = elbo_estimate(
        q,
        data,
        prior,
        cfg.final_elbo_samples,
        seed::derive(cfg.seed, &[tag::FINAL_ELBO]),
    )?;
    if !fin.value.is_finite() {
        return Err(Error::NonFinite {
            iteration: cfg.iterations,
            block: "final_elbo".into(),
        });
    }
    Ok(FitResult {
        point_estimate: q.point_estimate(&cfg.bounds)?,
        final_state: q.clone(),
        elbo_trace: trace,
        final_elbo: fin.value,
        final_elbo_std_error: fin.std_error,
    })
}
