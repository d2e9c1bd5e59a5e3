use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::expert::ExpertFamily;
use crate::error::{check_dim, Error, Result};
use crate::scalar::{log_sum_exp, normal_log_pdf, Scalar};

/// One atom `exp(α0) δ_(α1, β, σ²)` of a mixing measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertComponent<T> {
    /// Gating bias; the atom weight is `exp(alpha0)`.
    pub alpha0: T,
    /// Gating slope.
    pub alpha1: Vec<T>,
    /// Expert mean parameters, laid out per [`ExpertFamily`].
    pub beta: Vec<T>,
    /// Expert variance.
    pub sigma2: T,
}

impl<T: Scalar> ExpertComponent<T> {
    pub fn new(alpha0: T, alpha1: Vec<T>, beta: Vec<T>, sigma2: T) -> Self {
        Self {
            alpha0,
            alpha1,
            beta,
            sigma2,
        }
    }

    pub fn weight(&self) -> T {
        self.alpha0.exp()
    }

    /// The Voronoi coordinate `ω = (α1, β, σ²)`.
    pub fn omega(&self) -> impl Iterator<Item = T> + '_ {
        self.alpha1
            .iter()
            .chain(&self.beta)
            .copied()
            .chain(std::iter::once(self.sigma2))
    }
}

/// A finite positive mixing measure `G = Σ_j exp(α0j) δ_(α1j, βj, σj²)`.
///
/// Fully determines the conditional density
/// `f_G(y | x) = Σ_j softmax_j(α0 + xᵀα1) N(y | E(x, βj), σj²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "MeasureRecord<T>",
    into = "MeasureRecord<T>",
    bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct MixingMeasure<T> {
    family: ExpertFamily<T>,
    dim: usize,
    components: Vec<ExpertComponent<T>>,
}

/// Flat serialized form: `d`, `family` name, optional constant `level`, and
/// the component list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureRecord<T> {
    pub d: usize,
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<T>,
    pub components: Vec<ExpertComponent<T>>,
}

impl<T: Scalar> TryFrom<MeasureRecord<T>> for MixingMeasure<T> {
    type Error = Error;

    fn try_from(r: MeasureRecord<T>) -> Result<Self> {
        let family = match (r.family.as_str(), r.level) {
            ("linear", None) => ExpertFamily::Linear,
            ("sigmoid", None) => ExpertFamily::Sigmoid,
            ("constant", Some(level)) => ExpertFamily::Constant { level },
            ("constant", None) => return Err(Error::Parse("constant family needs `level`".into())),
            ("linear" | "sigmoid", Some(_)) => {
                return Err(Error::Parse(format!(
                    "`level` is only valid for the constant family, not {}",
                    r.family
                )))
            }
            (other, _) => return Err(Error::Parse(format!("unknown expert family `{other}`"))),
        };
        Self::new(family, r.d, r.components)
    }
}

impl<T: Scalar> From<MixingMeasure<T>> for MeasureRecord<T> {
    fn from(g: MixingMeasure<T>) -> Self {
        let level = match g.family {
            ExpertFamily::Constant { level } => Some(level),
            _ => None,
        };
        Self {
            d: g.dim,
            family: g.family.name().to_string(),
            level,
            components: g.components,
        }
    }
}

impl<T: Scalar> MixingMeasure<T> {
    pub fn new(family: ExpertFamily<T>, dim: usize, components: Vec<ExpertComponent<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Argument("mixing measure needs at least one component".into()));
        }
        if dim == 0 {
            return Err(Error::Argument("input dimension must be positive".into()));
        }
        let p = family.param_dim(dim);
        for c in &components {
            check_dim(dim, c.alpha1.len())?;
            check_dim(p, c.beta.len())?;
            let finite =
                c.alpha0.is_finite() && c.alpha1.iter().all(|v| v.is_finite()) && c.beta.iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::Argument("non-finite component parameter".into()));
            }
            if !(c.sigma2 > T::zero() && c.sigma2.is_finite()) {
                return Err(Error::Argument(format!(
                    "expert variance must be positive, got {}",
                    c.sigma2
                )));
            }
        }
        Ok(Self {
            family,
            dim,
            components,
        })
    }

    pub fn family(&self) -> &ExpertFamily<T> {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ExpertComponent<T>] {
        &self.components
    }

    pub fn component(&self, j: usize) -> &ExpertComponent<T> {
        &self.components[j]
    }

    /// Rebuilds with edited components, re-validating invariants.
    pub fn map_components(&self, f: impl FnMut(&ExpertComponent<T>) -> ExpertComponent<T>) -> Result<Self> {
        Self::new(self.family, self.dim, self.components.iter().map(f).collect())
    }

    pub fn with_components(&self, components: Vec<ExpertComponent<T>>) -> Result<Self> {
        Self::new(self.family, self.dim, components)
    }

    /// Components reordered so that new position `i` holds old component `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        check_dim(self.k(), order.len())?;
        self.with_components(order.iter().map(|&i| self.components[i].clone()).collect())
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Scalar>(&self) -> MixingMeasure<U> {
        let cv = |v: T| U::lit(v.to_f64_lossy());
        let family = match self.family {
            ExpertFamily::Linear => ExpertFamily::Linear,
            ExpertFamily::Sigmoid => ExpertFamily::Sigmoid,
            ExpertFamily::Constant { level } => ExpertFamily::Constant { level: cv(level) },
        };
        MixingMeasure {
            family,
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| ExpertComponent {
                    alpha0: cv(c.alpha0),
                    alpha1: c.alpha1.iter().map(|&v| cv(v)).collect(),
                    beta: c.beta.iter().map(|&v| cv(v)).collect(),
                    sigma2: cv(c.sigma2),
                })
                .collect(),
        }
    }

    /// Gating normal form: last component has zero gating bias and slope.
    pub fn is_gating_normalized(&self) -> bool {
        let last = self.components.last().unwrap();
        last.alpha0 == T::zero() && last.alpha1.iter().all(|v| *v == T::zero())
    }

    fn logits_into(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(
            self.components
                .iter()
                .map(|c| c.alpha0 + c.alpha1.iter().zip(x).fold(T::zero(), |acc, (&a, &xi)| acc + a * xi)),
        );
    }

    /// Log softmax gating weights at `x`.
    pub fn log_gate_weights(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim, x.len())?;
        let mut logits = Vec::with_capacity(self.k());
        self.logits_into(x, &mut logits);
        let lse = log_sum_exp(&logits);
        Ok(logits.into_iter().map(|l| l - lse).collect())
    }

    /// Softmax gating weights at `x` (max-subtracted).
    pub fn gate_weights(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.log_gate_weights(x)?.into_iter().map(T::exp).collect())
    }

    /// Per-component `log w_j(x) + log N(y | E(x, βj), σj²)`.
    pub fn log_component_terms(&self, y: T, x: &[T]) -> Result<Vec<T>> {
        let mut terms = self.log_gate_weights(x)?;
        for (t, c) in terms.iter_mut().zip(&self.components) {
            *t = *t + normal_log_pdf(y, self.family.mean(&c.beta, x), c.sigma2);
        }
        Ok(terms)
    }

    pub fn log_conditional_density(&self, y: T, x: &[T]) -> Result<T> {
        Ok(log_sum_exp(&self.log_component_terms(y, x)?))
    }

    /// `f_G(y | x)`.
    pub fn conditional_density(&self, y: T, x: &[T]) -> Result<T> {
        Ok(self.log_conditional_density(y, x)?.exp())
    }

    /// `g_G(y, x) = f_G(y | x) · 2^{-d}` on `[-1,1]^d`, zero outside.
    pub fn joint_density(&self, y: T, x: &[T]) -> Result<T> {
        check_dim(self.dim, x.len())?;
        if x.iter().any(|v| v.abs() > T::one()) {
            return Ok(T::zero());
        }
        let uniform = T::lit(2.0).powi(-(self.dim as i32));
        Ok(self.conditional_density(y, x)? * uniform)
    }

    /// `Σ_i log f_G(y_i | x_i)`; zero for an empty dataset.
    pub fn log_likelihood(&self, data: &Dataset<T>) -> Result<T> {
        if data.is_empty() {
            return Ok(T::zero());
        }
        check_dim(self.dim, data.dim())?;
        let mut total = T::zero();
        for (x, &y) in data.rows() {
            total = total + self.log_conditional_density(y, x)?;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::dataset::Dataset;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn phi(z: f64) -> f64 {
        (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
    }

    fn lin(alpha0: f64, alpha1: Vec<f64>, beta: Vec<f64>, sigma2: f64) -> ExpertComponent<f64> {
        ExpertComponent::new(alpha0, alpha1, beta, sigma2)
    }

    fn two_means(d: usize) -> MixingMeasure<f64> {
        let mut b2 = vec![0.0; d + 1];
        b2[0] = 2.0;
        MixingMeasure::new(
            ExpertFamily::Linear,
            d,
            vec![
                lin(0.0, vec![0.0; d], vec![0.0; d + 1], 1.0),
                lin(0.0, vec![0.0; d], b2, 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn gate_weight_examples() {
        let sym = MixingMeasure::new(
            ExpertFamily::Linear,
            2,
            (0..3).map(|_| lin(0.0, vec![0.0, 0.0], vec![0.0; 3], 1.0)).collect(),
        )
        .unwrap();
        for w in sym.gate_weights(&[0.4, -0.9]).unwrap() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        let one = MixingMeasure::new(ExpertFamily::Linear, 1, vec![lin(1.3, vec![4.0], vec![0.0; 2], 1.0)]).unwrap();
        assert_eq!(one.gate_weights(&[0.2]).unwrap(), vec![1.0]);
        let two = MixingMeasure::new(
            ExpertFamily::Linear,
            1,
            vec![
                lin(2f64.ln(), vec![0.0], vec![0.0; 2], 1.0),
                lin(0.0, vec![0.0], vec![0.0; 2], 1.0),
            ],
        )
        .unwrap();
        let w = two.gate_weights(&[0.77]).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15 && (w[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(two.gate_weights(&[0.1, 0.2]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn gate_weights_stable_for_huge_logits() {
        let g = MixingMeasure::new(
            ExpertFamily::Linear,
            1,
            vec![
                lin(900.0, vec![0.0], vec![0.0; 2], 1.0),
                lin(0.0, vec![0.0], vec![0.0; 2], 1.0),
            ],
        )
        .unwrap();
        let w = g.gate_weights(&[0.0]).unwrap();
        assert_eq!(w[0], 1.0);
        assert!(w[1] >= 0.0 && w.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn conditional_density_examples() {
        let std = MixingMeasure::new(ExpertFamily::Linear, 1, vec![lin(0.0, vec![0.0], vec![0.0, 0.0], 1.0)]).unwrap();
        let v = std.conditional_density(0.0, &[0.3]).unwrap();
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-15);

        let dup = MixingMeasure::new(
            ExpertFamily::Linear,
            1,
            vec![
                lin(0.0, vec![0.0], vec![0.0, 0.0], 1.0),
                lin(0.0, vec![0.0], vec![0.0, 0.0], 1.0),
            ],
        )
        .unwrap();
        assert!((dup.conditional_density(0.0, &[0.3]).unwrap() - v).abs() < 1e-15);

        // golden value: direct two-term evaluation 0.5 (φ(0) + φ(2))
        let golden = 0.5 * (phi(0.0) + phi(2.0));
        let got = two_means(1).conditional_density(0.0, &[-0.6]).unwrap();
        assert!((got - golden).abs() < 1e-15, "{got} vs {golden}");
    }

    #[test]
    fn joint_density_examples() {
        let g = two_means(2);
        let x = [0.25, -0.5];
        let v = g.conditional_density(0.4, &x).unwrap();
        assert!((g.joint_density(0.4, &x).unwrap() - v / 4.0).abs() < 1e-16);
        assert_eq!(g.joint_density(0.4, &[1.5, 0.0]).unwrap(), 0.0);
        let std = MixingMeasure::new(ExpertFamily::Linear, 1, vec![lin(0.0, vec![0.0], vec![0.0, 0.0], 1.0)]).unwrap();
        assert!((std.joint_density(0.0, &[0.0]).unwrap() - 0.398_942_280_401_432_7 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn log_likelihood_examples() {
        let std = MixingMeasure::new(ExpertFamily::Linear, 1, vec![lin(0.0, vec![0.0], vec![0.0, 0.0], 1.0)]).unwrap();
        let empty = Dataset::<f64>::new(1, vec![], vec![]).unwrap();
        assert_eq!(std.log_likelihood(&empty).unwrap(), 0.0);
        let one = Dataset::new(1, vec![0.2], vec![0.0]).unwrap();
        let ll = std.log_likelihood(&one).unwrap();
        assert!((ll + 0.918_938_533_204_672_7).abs() < 1e-14);
        let two = Dataset::new(1, vec![0.2, 0.2], vec![0.0, 0.0]).unwrap();
        assert!((std.log_likelihood(&two).unwrap() - 2.0 * ll).abs() < 1e-14);
    }

    #[test]
    fn works_in_f32() {
        let g = two_means(1).cast::<f32>();
        let got = g.conditional_density(0.0, &[-0.6]).unwrap();
        assert!((got as f64 - 0.5 * (phi(0.0) + phi(2.0))).abs() < 1e-6);
    }

    #[test]
    fn rejects_invalid_components() {
        assert!(MixingMeasure::<f64>::new(ExpertFamily::Linear, 1, vec![]).is_err());
        assert!(MixingMeasure::new(ExpertFamily::Linear, 1, vec![lin(0.0, vec![0.0], vec![0.0, 0.0], 0.0)]).is_err());
        assert!(MixingMeasure::new(ExpertFamily::Linear, 1, vec![lin(0.0, vec![0.0], vec![0.0], 1.0)]).is_err());
    }

    fn arb_measure(d: usize) -> impl Strategy<Value = MixingMeasure<f64>> {
        let comp = (
            -3.0..3.0f64,
            prop::collection::vec(-3.0..3.0f64, d),
            prop::collection::vec(-3.0..3.0f64, d + 1),
            0.05..4.0f64,
        )
            .prop_map(|(a0, a1, b, s)| ExpertComponent::new(a0, a1, b, s));
        prop::collection::vec(comp, 1..5).prop_map(move |cs| MixingMeasure::new(ExpertFamily::Linear, d, cs).unwrap())
    }

    proptest! {
        #[test]
        fn gate_weights_on_simplex(g in arb_measure(2), x in prop::collection::vec(-1.0..1.0f64, 2)) {
            let w = g.gate_weights(&x).unwrap();
            prop_assert!(w.iter().all(|&v| v > 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn density_between_component_extremes(g in arb_measure(2), x in prop::collection::vec(-1.0..1.0f64, 2), y in -6.0..6.0f64) {
            let f = g.conditional_density(y, &x).unwrap();
            let dens: Vec<f64> = g.components().iter()
                .map(|c| normal_log_pdf(y, g.family().mean(&c.beta, &x), c.sigma2).exp())
                .collect();
            let lo = dens.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = dens.iter().copied().fold(0.0, f64::max);
            prop_assert!(f >= lo * (1.0 - 1e-12) && f <= hi * (1.0 + 1e-12));
        }

        #[test]
        fn merge_invariance(g in arb_measure(1), x in prop::collection::vec(-1.0..1.0f64, 1), y in -5.0..5.0f64) {
            let mut comps = g.components().to_vec();
            let mut split = comps[0].clone();
            split.alpha0 -= 2f64.ln();
            comps[0] = split.clone();
            comps.push(split);
            let h = g.with_components(comps).unwrap();
            let a = g.conditional_density(y, &x).unwrap();
            let b = h.conditional_density(y, &x).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn log_likelihood_permutation_invariant(g in arb_measure(1), seed in 0u64..1000) {
            let data = crate::model::dgp::sample_smoge(&g, 12, seed);
            let ll = g.log_likelihood(&data).unwrap();
            let rev: Vec<usize> = (0..g.k()).rev().collect();
            let ll_perm = g.permuted(&rev).unwrap().log_likelihood(&data).unwrap();
            let rows: Vec<usize> = (0..data.len()).rev().collect();
            let ll_rows = g.log_likelihood(&data.select(&rows)).unwrap();
            prop_assert!((ll - ll_perm).abs() < 1e-9 * ll.abs().max(1.0));
            prop_assert!((ll - ll_rows).abs() < 1e-9 * ll.abs().max(1.0));
        }
    }

    #[test]
    fn conditional_density_integrates_to_one() {
        use rand::Rng;
        let mut rng = crate::seed::rng(11);
        for _ in 0..20 {
            let d = 2;
            let comps = (0..3)
                .map(|_| {
                    lin(
                        rng.random_range(-2.0..2.0),
                        (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
                        (0..=d).map(|_| rng.random_range(-3.0..3.0)).collect(),
                        rng.random_range(0.1..3.0),
                    )
                })
                .collect();
            let g = MixingMeasure::new(ExpertFamily::Linear, d, comps).unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (a, b, m) = (-30.0, 30.0, 20001);
            let h = (b - a) / m as f64;
            let integral: f64 = (0..m)
                .map(|i| g.conditional_density(a + (i as f64 + 0.5) * h, &x).unwrap() * h)
                .sum();
            assert!((integral - 1.0).abs() < 1e-6, "{integral}");
        }
    }
}
