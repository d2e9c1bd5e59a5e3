//! Mean-field black-box variational inference for fixed-`K` SMoGE models.

mod adam;
mod elbo;
mod fit;
mod joint;
mod layout;
mod prior;
mod state;

pub use adam::{Adam, AdamConfig};
pub use elbo::{elbo_estimate, elbo_gradient, ElboEstimate, ElboGradient};
pub use fit::{fit, fit_from, FitConfig, FitResult, LearningRate};
pub use joint::{log_joint, log_joint_grad};
pub use layout::{Block, ParamLayout};
pub use prior::PriorConfig;
pub use state::VariationalState;
