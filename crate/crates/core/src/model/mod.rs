//! The SMoGE parameterization, densities and data generators.

mod bounds;
mod dataset;
mod dgp;
mod expert;
mod measure;

pub use bounds::ParamBounds;
pub use dataset::{Dataset, HardGatedTruth, Provenance, Truth};
pub use dgp::{sample_dgp, sample_smoge, DgpSpec};
pub use expert::{expert_mean, ExpertFamily, ParamRole};
pub use measure::{ExpertComponent, MeasureRecord, MixingMeasure};
