use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Mean-function family `E(x, β)` of the Gaussian experts.
///
/// Parameter layouts:
/// * `Linear`: `β = (β0, β1_1, …, β1_d)`, `E = β0 + xᵀβ1`.
/// * `Sigmoid`: `β ∈ ℝ^d`, `E = 1 / (1 + exp(-xᵀβ))`.
/// * `Constant { level }`: `β ∈ ℝ^d` is carried but inert, `E = level`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExpertFamily<T> {
    Linear,
    Sigmoid,
    Constant { level: T },
}

/// Which prior variance governs an expert parameter coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    Intercept,
    Slope,
}

impl<T: Scalar> ExpertFamily<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Sigmoid => "sigmoid",
            Self::Constant { .. } => "constant",
        }
    }

    /// Same family tag, ignoring the constant level.
    pub fn same_kind(&self, other: &Self) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }

    /// Dimension `p` of the expert parameter vector for input dimension `d`.
    pub fn param_dim(&self, d: usize) -> usize {
        match self {
            Self::Linear => d + 1,
            Self::Sigmoid | Self::Constant { .. } => d,
        }
    }

    pub fn param_role(&self, v: usize) -> ParamRole {
        match self {
            Self::Linear if v == 0 => ParamRole::Intercept,
            Self::Constant { .. } => ParamRole::Intercept,
            _ => ParamRole::Slope,
        }
    }

    /// Covariate coordinate that parameter `v` multiplies inside the mean, if any.
    pub fn slope_covariate(&self, v: usize) -> Option<usize> {
        match self {
            Self::Linear => v.checked_sub(1),
            Self::Sigmoid => Some(v),
            Self::Constant { .. } => None,
        }
    }

    /// Lipschitz constant of `β ↦ E(x, β)` uniformly over `x ∈ [-1,1]^d`.
    pub fn lipschitz(&self, d: usize) -> T {
        let d = T::from_usize(d).unwrap();
        match self {
            Self::Linear => (d + T::one()).sqrt(),
            Self::Sigmoid => d.sqrt() / T::lit(4.0),
            // any positive constant bounds a zero variation
            Self::Constant { .. } => T::one(),
        }
    }

    #[inline]
    pub fn mean(&self, beta: &[T], x: &[T]) -> T {
        match self {
            Self::Linear => beta[0] + dot(&beta[1..], x),
            Self::Sigmoid => logistic(dot(beta, x)),
            Self::Constant { level } => *level,
        }
    }

    /// Writes `∂E/∂β` into `grad` and returns `E`.
    #[inline]
    pub fn mean_and_grad(&self, beta: &[T], x: &[T], grad: &mut [T]) -> T {
        match self {
            Self::Linear => {
                grad[0] = T::one();
                grad[1..].copy_from_slice(x);
                beta[0] + dot(&beta[1..], x)
            }
            Self::Sigmoid => {
                let s = logistic(dot(beta, x));
                let ds = s * (T::one() - s);
                for (g, &xi) in grad.iter_mut().zip(x) {
                    *g = ds * xi;
                }
                s
            }
            Self::Constant { level } => {
                grad.iter_mut().for_each(|g| *g = T::zero());
                *level
            }
        }
    }

    /// Row-major `p × p` Hessian `∂²E/∂β∂β`.
    pub fn mean_hessian(&self, beta: &[T], x: &[T]) -> Vec<T> {
        let p = beta.len();
        let mut h = vec![T::zero(); p * p];
        if let Self::Sigmoid = self {
            let s = logistic(dot(beta, x));
            let dds = s * (T::one() - s) * (T::one() - T::lit(2.0) * s);
            for u in 0..p {
                for v in 0..p {
                    h[u * p + v] = dds * x[u] * x[v];
                }
            }
        }
        h
    }
}

/// Evaluates an expert mean (free-function form of [`ExpertFamily::mean`]).
pub fn expert_mean<T: Scalar>(family: &ExpertFamily<T>, beta: &[T], x: &[T]) -> crate::Result<T> {
    crate::error::check_dim(family.param_dim(x.len()), beta.len())?;
    Ok(family.mean(beta, x))
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&u, &v)| acc + u * v)
}

#[inline]
fn logistic<T: Scalar>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}
