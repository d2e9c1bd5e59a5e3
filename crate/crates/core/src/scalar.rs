//! Scalar abstraction shared by the model, Voronoi and identifiability code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the deterministic model code is generic over (`f32` or `f64`).
///
/// Stochastic routines (sampling, variational inference, Monte-Carlo
/// divergences) run in `f64` and convert at the boundary.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` constant.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `log(Σ exp(v_i))` with max subtraction. Returns `-inf` for an empty slice.
pub fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let sum = values.iter().fold(T::zero(), |acc, &v| acc + (v - max).exp());
    max + sum.ln()
}

/// Gaussian log density `log N(y | mean, var)`.
#[inline]
pub fn normal_log_pdf<T: Scalar>(y: T, mean: T, var: T) -> T {
    let r = y - mean;
    -T::lit(0.5) * ((T::TAU()) * var).ln() - r * r / (T::lit(2.0) * var)
}

/// Euclidean norm.
pub fn norm2<T: Scalar>(v: impl IntoIterator<Item = T>) -> T {
    v.into_iter().fold(T::zero(), |acc, x| acc + x * x).sqrt()
}
