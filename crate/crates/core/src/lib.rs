//! Bayesian softmax-gated mixtures of Gaussian experts (SMoGE).

pub mod contraction;
pub mod divergences;
pub mod error;
pub mod identifiability;
pub mod io;
pub mod model;
pub mod scalar;
pub mod seed;
pub mod selection;
pub mod vi;
pub mod voronoi;

pub use error::{Error, Result};
pub use model::{Dataset, DgpSpec, ExpertComponent, ExpertFamily, MixingMeasure, ParamBounds};
pub use scalar::Scalar;

pub type MixingMeasure64 = MixingMeasure<f64>;
pub type MixingMeasure32 = MixingMeasure<f32>;
pub type Dataset64 = Dataset<f64>;
