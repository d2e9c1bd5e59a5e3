//! Per-subcommand options. Each struct is both the clap flag set and the
//! config-file schema; every field is optional so that flag, environment,
//! file and default layers can be merged field by field. A fully resolved
//! record has every applicable field set and re-parses to itself.

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use smoge::selection::LrRule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DgpKind {
    B2,
    B3,
    B4,
    Smoge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Linear,
    Sigmoid,
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScaleKind {
    Desk,
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum EstimatorKind {
    ViMean,
    MhPosteriorMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RatesMode {
    Slope,
    Scan,
}

/// Fills each `None` field of `$a` from `$b`.
macro_rules! layer {
    ($a:expr, $b:expr, [$($f:ident),* $(,)?]) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f.clone(); } )*
    };
}

pub trait Layered: Sized {
    /// Fields of `self` win; missing ones come from `lower`.
    fn over(self, lower: &Self) -> Self;
    fn seed_mut(&mut self) -> &mut Option<u64>;
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOpts {
    #[arg(long, value_enum)]
    pub dgp: Option<DgpKind>,
    /// Gating separation for b4.
    #[arg(long)]
    pub sep: Option<f64>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub kstar: Option<usize>,
    /// Mixing-measure file for `--dgp smoge`.
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Layered for SimulateOpts {
    fn over(mut self, lower: &Self) -> Self {
        layer!(self, lower, [dgp, sep, d, kstar, measure, n, seed]);
        self
    }
    fn seed_mut(&mut self) -> &mut Option<u64> {
        &mut self.seed
    }
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOpts {
    /// Dataset CSV (`x1..xd,y[,z]`).
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyKind>,
    /// Mean level of the constant family.
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Adam step size (initial value when `--lr-final` is set).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Final step size of a geometric decay.
    #[arg(long)]
    pub lr_final: Option<f64>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub final_elbo_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Layered for FitOpts {
    fn over(mut self, lower: &Self) -> Self {
        layer!(
            self,
            lower,
            [
                data,
                k,
                family,
                level,
                iterations,
                lr,
                lr_final,
                mc_samples,
                final_elbo_samples,
                seed
            ]
        );
        self
    }
    fn seed_mut(&mut self) -> &mut Option<u64> {
        &mut self.seed
    }
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectOpts {
    #[arg(long, value_enum)]
    pub dgp: Option<DgpKind>,
    #[arg(long)]
    pub sep: Option<f64>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub kstar: Option<usize>,
    /// Single sample size; shorthand for a one-point `--n-grid`.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub scale: Option<ScaleKind>,
    /// Full iteration budget (desk scale runs a fifth of it).
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Constant learning rate overriding the generator's rule.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub lr: Option<f64>,
    #[arg(skip)]
    pub lr_rule: Option<LrRule>,
    #[arg(long)]
    pub final_elbo_samples: Option<usize>,
    /// Failed replications tolerated before exiting with status 2.
    #[arg(long)]
    pub failure_budget: Option<usize>,
}

impl Layered for SelectOpts {
    fn over(mut self, lower: &Self) -> Self {
        layer!(
            self,
            lower,
            [
                dgp,
                sep,
                d,
                kstar,
                n,
                n_grid,
                candidates,
                reps,
                seed,
                scale,
                iterations,
                lr,
                lr_rule,
                final_elbo_samples,
                failure_budget
            ]
        );
        self
    }
    fn seed_mut(&mut self) -> &mut Option<u64> {
        &mut self.seed
    }
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesOpts {
    /// Mixing-measure file of the true model.
    #[arg(long)]
    pub dgp_file: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<RatesMode>,
    #[arg(long)]
    pub fit_k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorKind>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_final: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub mh_steps: Option<usize>,
    #[arg(long)]
    pub n_mc: Option<usize>,
    /// Loss levels of the ratio scan, decreasing.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Layered for RatesOpts {
    fn over(mut self, lower: &Self) -> Self {
        layer!(
            self,
            lower,
            [
                dgp_file, mode, fit_k, n_grid, reps, estimator, iterations, lr, lr_final, restarts, mh_steps, n_mc,
                eps, trials, seed
            ]
        );
        self
    }
    fn seed_mut(&mut self) -> &mut Option<u64> {
        &mut self.seed
    }
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossesOpts {
    /// Candidate mixing-measure file.
    #[arg(long)]
    pub g: Option<String>,
    /// Reference mixing-measure file.
    #[arg(long)]
    pub gstar: Option<String>,
    /// Also estimate the Hellinger distance between the joint densities.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub hellinger: Option<bool>,
    #[arg(long)]
    pub n_mc: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Layered for LossesOpts {
    fn over(mut self, lower: &Self) -> Self {
        layer!(self, lower, [g, gstar, hellinger, n_mc, seed]);
        self
    }
    fn seed_mut(&mut self) -> &mut Option<u64> {
        &mut self.seed
    }
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentOpts {
    #[arg(long, value_enum)]
    pub family: Option<FamilyKind>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub order: Option<u8>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n_x: Option<usize>,
    /// Expert parameters; drawn from N(0, 1) under the seed when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Layered for IdentOpts {
    fn over(mut self, lower: &Self) -> Self {
        layer!(self, lower, [family, level, order, d, n_x, beta, seed]);
        self
    }
    fn seed_mut(&mut self) -> &mut Option<u64> {
        &mut self.seed
    }
}
