use serde::{Deserialize, Serialize};

use super::measure::MixingMeasure;
use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// Paired covariates `x ∈ [-1,1]^d` (row-major) and responses `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    dim: usize,
    x: Vec<T>,
    y: Vec<T>,
    pub provenance: Provenance,
}

/// How a dataset was generated.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Generator id: `smoge`, `b2`, `b3`, `b4`, or `external`.
    pub dgp: String,
    pub seed: Option<u64>,
    /// True 0-based expert labels, when the generator records them.
    pub assignments: Option<Vec<usize>>,
    pub truth: Option<Truth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Truth {
    Smoge { measure: MixingMeasure<f64> },
    HardGated(HardGatedTruth),
}

/// A hard-gated linear-expert generator: `z = argmax_k (W x + b)_k`,
/// `y | z = k ~ N(β0k + xᵀβ1k, σk²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardGatedTruth {
    /// Logit weight rows, one per expert.
    pub logit_weights: Vec<Vec<f64>>,
    pub logit_bias: Vec<f64>,
    pub intercepts: Vec<f64>,
    /// Realized slopes (after any per-replication noise).
    pub slopes: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

impl HardGatedTruth {
    pub fn k(&self) -> usize {
        self.intercepts.len()
    }

    /// First index attaining the maximal logit.
    pub fn assign(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (k, (w, b)) in self.logit_weights.iter().zip(&self.logit_bias).enumerate() {
            let v = b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
            if v > best_v {
                best_v = v;
                best = k;
            }
        }
        best
    }

    /// Softmax relaxation of the hard gate with logits multiplied by `sharpness`,
    /// normalized so the last expert carries zero gating.
    pub fn softmax_surrogate(&self, sharpness: f64) -> Result<MixingMeasure<f64>> {
        let k = self.k();
        let d = self.slopes[0].len();
        let last_w = &self.logit_weights[k - 1];
        let last_b = self.logit_bias[k - 1];
        let comps = (0..k)
            .map(|j| {
                let mut beta = Vec::with_capacity(d + 1);
                beta.push(self.intercepts[j]);
                beta.extend_from_slice(&self.slopes[j]);
                super::ExpertComponent::new(
                    sharpness * (self.logit_bias[j] - last_b),
                    self.logit_weights[j]
                        .iter()
                        .zip(last_w)
                        .map(|(a, b)| sharpness * (a - b))
                        .collect(),
                    beta,
                    self.variances[j],
                )
            })
            .collect();
        MixingMeasure::new(super::ExpertFamily::Linear, d, comps)
    }
}

impl<T: Scalar> Dataset<T> {
    /// `x` is row-major with `dim` columns; values must lie in `[-1, 1]`.
    pub fn new(dim: usize, x: Vec<T>, y: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("input dimension must be positive".into()));
        }
        check_dim(y.len() * dim, x.len())?;
        if let Some(v) = x.iter().find(|v| !(v.abs() <= T::one())) {
            return Err(Error::Argument(format!("covariate {v} outside [-1, 1]")));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite response".into()));
        }
        Ok(Self {
            dim,
            x,
            y,
            provenance: Provenance {
                dgp: "external".into(),
                ..Default::default()
            },
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn x(&self, i: usize) -> &[T] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn x_flat(&self) -> &[T] {
        &self.x
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[T], &T)> {
        self.x.chunks_exact(self.dim).zip(&self.y)
    }

    /// Subset of rows, in the given order. Recorded assignments follow the rows.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut x = Vec::with_capacity(rows.len() * self.dim);
        for &i in rows {
            x.extend_from_slice(self.x(i));
        }
        let y = rows.iter().map(|&i| self.y[i]).collect();
        let mut provenance = self.provenance.clone();
        provenance.assignments = provenance.assignments.map(|z| rows.iter().map(|&i| z[i]).collect());
        Self {
            dim: self.dim,
            x,
            y,
            provenance,
        }
    }

    /// Concatenation of two datasets with the same dimension.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let mut x = self.x.clone();
        x.extend_from_slice(&other.x);
        let mut y = self.y.clone();
        y.extend_from_slice(&other.y);
        Ok(Self {
            dim: self.dim,
            x,
            y,
            provenance: Provenance {
                dgp: "external".into(),
                ..Default::default()
            },
        })
    }
}
