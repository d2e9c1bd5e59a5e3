//! Numerical identifiability checks: strong-identifiability rank tests on
//! expert derivative features, pairwise-distinctness of atoms, and the
//! gating translations that leave SMoGE densities unchanged.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::model::{ExpertFamily, MixingMeasure, ParamBounds};
use crate::scalar::Scalar;
use crate::seed;

/// Relative singular-value gap below which the feature set counts as dependent.
pub const RANK_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Identifiable,
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankTestReport {
    pub order: u8,
    pub feature_count: usize,
    pub min_singular_value: f64,
    pub max_singular_value: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// Column functions `x ↦ feature(x)` of the rank test, evaluated at one `x`.
fn features(family: &ExpertFamily<f64>, beta: &[f64], x: &[f64], order: u8, out: &mut Vec<f64>) {
    let p = beta.len();
    let mut grad = vec![0.0; p];
    family.mean_and_grad(beta, x, &mut grad);
    out.extend_from_slice(&grad);
    if order == 1 {
        return;
    }
    let hess = family.mean_hessian(beta, x);
    for u in 0..p {
        for v in u..p {
            out.push(hess[u * p + v]);
        }
    }
    for (u, &xu) in x.iter().enumerate() {
        for (v, &gv) in grad.iter().enumerate() {
            // x_u ∂E/∂β_v and x_c ∂E/∂β_v' coincide when β_v multiplies x_c
            // and β_v' multiplies x_u; keep one of each mirrored pair.
            if matches!(family.slope_covariate(v), Some(c) if u > c) {
                continue;
            }
            out.push(xu * gv);
        }
    }
}

/// Rank test of first-order (`order = 1`: `∂E/∂β`) or second-order
/// (`order = 2`: adds `∂²E/∂β∂β` and `x ∂E/∂β`) strong identifiability at
/// `beta`, using `n_x` covariates drawn uniformly from `[-1,1]^d`.
pub fn strong_identifiability_test(
    family: &ExpertFamily<f64>,
    d: usize,
    beta: &[f64],
    order: u8,
    n_x: usize,
    seed: u64,
) -> Result<RankTestReport> {
    if !matches!(order, 1 | 2) {
        return Err(Error::Argument(format!("order must be 1 or 2, got {order}")));
    }
    check_dim(family.param_dim(d), beta.len())?;
    let mut rng = seed::rng(seed);
    let mut row = Vec::new();
    let mut data = Vec::new();
    let mut x = vec![0.0; d];
    for _ in 0..n_x {
        x.iter_mut().for_each(|v| *v = rng.random_range(-1.0..=1.0));
        row.clear();
        features(family, beta, &x, order, &mut row);
        data.extend_from_slice(&row);
    }
    let m = row.len();
    if n_x < 2 * m {
        return Err(Error::Argument(format!(
            "need n_x >= {} for {m} features, got {n_x}",
            2 * m
        )));
    }
    let matrix = DMatrix::from_row_slice(n_x, m, &data);
    let sv = matrix.singular_values();
    let max = sv.max();
    let min = sv.min();
    let verdict = if max > 0.0 && min > RANK_THRESHOLD * max {
        Verdict::Identifiable
    } else {
        Verdict::Degenerate
    };
    Ok(RankTestReport {
        order,
        feature_count: m,
        min_singular_value: min,
        max_singular_value: max,
        threshold: RANK_THRESHOLD,
        verdict,
    })
}

/// Violations of pairwise distinctness of gating differences and expert blocks.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Assumption4Report {
    pub violations: Vec<String>,
}

impl Assumption4Report {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

fn max_abs_diff<T: Scalar>(a: impl Iterator<Item = T>, b: impl Iterator<Item = T>) -> T {
    a.zip(b).fold(T::zero(), |m, (u, v)| m.max((u - v).abs()))
}

/// Checks that the differences `α1i − α1j` (`i < j`) are pairwise distinct and
/// that the expert blocks `(βj, σj²)` are pairwise different, up to `tol` in max-norm.
pub fn check_assumption4<T: Scalar>(g: &MixingMeasure<T>, tol: T) -> Assumption4Report {
    let comps = g.components();
    let k = comps.len();
    let mut violations = Vec::new();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let diffs: Vec<Vec<T>> = pairs
        .iter()
        .map(|&(i, j)| {
            comps[i]
                .alpha1
                .iter()
                .zip(&comps[j].alpha1)
                .map(|(&a, &b)| a - b)
                .collect()
        })
        .collect();
    for a in 0..pairs.len() {
        for b in a + 1..pairs.len() {
            if max_abs_diff(diffs[a].iter().copied(), diffs[b].iter().copied()) <= tol {
                violations.push(format!("gating differences {:?} and {:?} coincide", pairs[a], pairs[b]));
            }
        }
    }
    for &(i, j) in &pairs {
        let bi = comps[i].beta.iter().copied().chain(std::iter::once(comps[i].sigma2));
        let bj = comps[j].beta.iter().copied().chain(std::iter::once(comps[j].sigma2));
        if max_abs_diff(bi, bj) <= tol {
            violations.push(format!("expert blocks {i} and {j} coincide"));
        }
    }
    Assumption4Report { violations }
}

/// Adds `t0` to every gating bias and `t1` to every gating slope.
/// Gating weights and densities are unchanged; the atom weights are not.
pub fn translate_gating<T: Scalar>(g: &MixingMeasure<T>, t0: T, t1: &[T]) -> Result<MixingMeasure<T>> {
    check_dim(g.dim(), t1.len())?;
    g.map_components(|c| {
        let mut c = c.clone();
        c.alpha0 = c.alpha0 + t0;
        c.alpha1.iter_mut().zip(t1).for_each(|(a, &t)| *a = *a + t);
        c
    })
}

/// [`translate_gating`], also reporting whether the result stays inside `bounds`.
pub fn translate_gating_within<T: Scalar>(
    g: &MixingMeasure<T>,
    t0: T,
    t1: &[T],
    bounds: &ParamBounds<T>,
) -> Result<(MixingMeasure<T>, bool)> {
    let out = translate_gating(g, t0, t1)?;
    let inside = bounds.contains(&out);
    Ok((out, inside))
}

/// Translates the gating so that component `anchor` has zero bias and slope.
pub fn normalize_gating_at<T: Scalar>(g: &MixingMeasure<T>, anchor: usize) -> Result<MixingMeasure<T>> {
    if anchor >= g.k() {
        return Err(Error::Argument(format!(
            "anchor {anchor} out of range for K = {}",
            g.k()
        )));
    }
    let a = g.component(anchor);
    let t1: Vec<T> = a.alpha1.iter().map(|&v| -v).collect();
    let mut out = translate_gating(g, -a.alpha0, &t1)?;
    // exact zeros on the anchor regardless of rounding
    let mut comps = out.components().to_vec();
    comps[anchor].alpha0 = T::zero();
    comps[anchor].alpha1.iter_mut().for_each(|v| *v = T::zero());
    out = out.with_components(comps)?;
    Ok(out)
}

/// Gating normal form: the last component's bias and slope become zero.
pub fn normalize_gating<T: Scalar>(g: &MixingMeasure<T>) -> MixingMeasure<T> {
    normalize_gating_at(g, g.k() - 1).expect("last component exists")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ExpertComponent;
    use crate::voronoi::loss_l1;
    use rand::Rng;

    fn random_measure(rng: &mut seed::Rng, k: usize, d: usize) -> MixingMeasure<f64> {
        let comps = (0..k)
            .map(|_| {
                ExpertComponent::new(
                    rng.random_range(-2.0..2.0),
                    (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
                    (0..=d).map(|_| rng.random_range(-2.0..2.0)).collect(),
                    rng.random_range(0.2..2.0),
                )
            })
            .collect();
        MixingMeasure::new(ExpertFamily::Linear, d, comps).unwrap()
    }

    fn verdict(family: ExpertFamily<f64>, beta: &[f64], order: u8, n_x: usize, seed: u64) -> Verdict {
        strong_identifiability_test(&family, 2, beta, order, n_x, seed)
            .unwrap()
            .verdict
    }

    #[test]
    fn canonical_verdicts_stable_in_sample_size() {
        for s in 0..10 {
            let mut rng = seed::rng(s);
            let lin: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let sig: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let cst = [0.3, -0.4];
            for n_x in [200, 400] {
                assert_eq!(verdict(ExpertFamily::Linear, &lin, 1, n_x, s), Verdict::Identifiable);
                assert_eq!(verdict(ExpertFamily::Linear, &lin, 2, n_x, s), Verdict::Degenerate);
                assert_eq!(verdict(ExpertFamily::Sigmoid, &sig, 2, n_x, s), Verdict::Identifiable);
                assert_eq!(
                    verdict(ExpertFamily::Constant { level: 1.0 }, &cst, 1, n_x, s),
                    Verdict::Degenerate
                );
            }
        }
    }

    #[test]
    fn rank_test_argument_errors() {
        let fam = ExpertFamily::<f64>::Sigmoid;
        assert!(strong_identifiability_test(&fam, 2, &[1.0, 1.0], 3, 100, 0).is_err());
        assert!(strong_identifiability_test(&fam, 2, &[1.0, 1.0], 2, 5, 0).is_err());
        assert!(strong_identifiability_test(&fam, 2, &[1.0], 1, 100, 0).is_err());
        let r = strong_identifiability_test(&fam, 2, &[1.0, -1.0], 2, 100, 0).unwrap();
        assert_eq!(r.feature_count, 2 + 3 + 3);
    }

    #[test]
    fn assumption4_examples() {
        let mut rng = seed::rng(1);
        let single = random_measure(&mut rng, 1, 2);
        assert!(check_assumption4(&single, 1e-9).passes());

        let mut comps = random_measure(&mut rng, 3, 2).components().to_vec();
        comps[2].beta = comps[0].beta.clone();
        comps[2].sigma2 = comps[0].sigma2;
        let dup = MixingMeasure::new(ExpertFamily::Linear, 2, comps).unwrap();
        assert!(!check_assumption4(&dup, 1e-9).passes());

        // equally spaced gating slopes: α1_0 − α1_1 = α1_1 − α1_2
        let spaced = random_measure(&mut rng, 3, 1).map_components(|c| c.clone()).unwrap();
        let mut comps = spaced.components().to_vec();
        for (j, c) in comps.iter_mut().enumerate() {
            c.alpha1 = vec![j as f64];
        }
        let spaced = spaced.with_components(comps).unwrap();
        assert!(!check_assumption4(&spaced, 1e-9).passes());

        let b2 = crate::model::DgpSpec::B2.hard_gated_truth(&mut seed::rng(0)).unwrap();
        assert!(check_assumption4(&b2.softmax_surrogate(1.0).unwrap(), 1e-9).passes());
    }

    #[test]
    fn translation_examples() {
        let mut rng = seed::rng(5);
        let g = random_measure(&mut rng, 3, 2);
        assert_eq!(translate_gating(&g, 0.0, &[0.0, 0.0]).unwrap(), g);
        let t = translate_gating(&g, 1.5, &[-0.7, 2.0]).unwrap();
        assert!(loss_l1(&t, &g).unwrap().total > 0.0);
        for _ in 0..100 {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let y = rng.random_range(-5.0..5.0);
            let (a, b) = (g.gate_weights(&x).unwrap(), t.gate_weights(&x).unwrap());
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
            assert!((g.joint_density(y, &x).unwrap() - t.joint_density(y, &x).unwrap()).abs() < 1e-12);
        }
        let (_, inside) = translate_gating_within(&g, 50.0, &[0.0, 0.0], &ParamBounds::default()).unwrap();
        assert!(!inside);
        assert!(translate_gating(&g, 0.0, &[0.0]).is_err());
    }

    #[test]
    fn normalization_examples() {
        let mut rng = seed::rng(9);
        for _ in 0..20 {
            let g = random_measure(&mut rng, 3, 2);
            let n = normalize_gating(&g);
            assert!(n.is_gating_normalized());
            assert_eq!(normalize_gating(&n), n);
            for _ in 0..100 {
                let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let y = rng.random_range(-5.0..5.0);
                assert!((g.conditional_density(y, &x).unwrap() - n.conditional_density(y, &x).unwrap()).abs() < 1e-12);
            }
            // density-equal pairs compare at zero loss once both are normalized
            let t = translate_gating(&g, -0.8, &[0.3, 1.1]).unwrap();
            assert!(loss_l1(&normalize_gating(&t), &normalize_gating(&g)).unwrap().total < 1e-10);
        }
        let g = random_measure(&mut rng, 2, 1);
        assert!(normalize_gating_at(&g, 2).is_err());
        assert!(normalize_gating_at(&g, 0).unwrap().component(0).alpha1 == vec![0.0]);
    }
}
