use serde::{Deserialize, Serialize};

use super::measure::MixingMeasure;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Compact parameter box `Θ`. Each block shares one interval per coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds<T> {
    pub alpha0: (T, T),
    pub alpha1: (T, T),
    pub beta: (T, T),
    pub sigma2: (T, T),
}

impl<T: Scalar> Default for ParamBounds<T> {
    fn default() -> Self {
        let box20 = (T::lit(-20.0), T::lit(20.0));
        Self {
            alpha0: box20,
            alpha1: box20,
            beta: box20,
            sigma2: (T::lit(1e-3), T::lit(1e3)),
        }
    }
}

impl<T: Scalar> ParamBounds<T> {
    pub fn new(alpha0: (T, T), alpha1: (T, T), beta: (T, T), sigma2: (T, T)) -> Result<Self> {
        let b = Self {
            alpha0,
            alpha1,
            beta,
            sigma2,
        };
        for (name, (lo, hi)) in [
            ("alpha0", alpha0),
            ("alpha1", alpha1),
            ("beta", beta),
            ("sigma2", sigma2),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Argument(format!("bad {name} interval [{lo}, {hi}]")));
            }
        }
        if sigma2.0 <= T::zero() {
            return Err(Error::Argument("sigma2 lower bound must be positive".into()));
        }
        Ok(b)
    }

    /// Human-readable list of coordinates outside the box.
    pub fn violations(&self, g: &MixingMeasure<T>) -> Vec<String> {
        let inside = |v: T, (lo, hi): (T, T)| v >= lo && v <= hi;
        let mut out = Vec::new();
        for (j, c) in g.components().iter().enumerate() {
            if !inside(c.alpha0, self.alpha0) {
                out.push(format!("component {j}: alpha0 = {}", c.alpha0));
            }
            for (u, &a) in c.alpha1.iter().enumerate() {
                if !inside(a, self.alpha1) {
                    out.push(format!("component {j}: alpha1[{u}] = {a}"));
                }
            }
            for (v, &b) in c.beta.iter().enumerate() {
                if !inside(b, self.beta) {
                    out.push(format!("component {j}: beta[{v}] = {b}"));
                }
            }
            if !inside(c.sigma2, self.sigma2) {
                out.push(format!("component {j}: sigma2 = {}", c.sigma2));
            }
        }
        out
    }

    pub fn contains(&self, g: &MixingMeasure<T>) -> bool {
        self.violations(g).is_empty()
    }

    pub fn clamp_sigma2(&self, s: T) -> T {
        s.max(self.sigma2.0).min(self.sigma2.1)
    }
}
