//! Synthetic data generators: the SMoGE model itself and three hard-gated
//! linear-expert designs used by the model-selection experiments.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, HardGatedTruth, Provenance, Truth};
use super::measure::MixingMeasure;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::{self, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dgp", rename_all = "lowercase")]
pub enum DgpSpec {
    /// Draws from `g_G` for a given mixing measure.
    Smoge { measure: MixingMeasure<f64> },
    /// Two linear experts in `d = 2`, expert 1 iff `x1 > x2`.
    B2,
    /// Four linear experts in `d = 6`, expert = argmax of the first four covariates.
    B3,
    /// Max-logit gating `argmax_k (W x + b)_k` with diagonal `W = separation · I`.
    B4 { separation: f64, d: usize, k_star: usize },
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::B4 { separation, d, k_star } => {
                if !(*separation > 0.0 && separation.is_finite()) {
                    return Err(Error::Config(format!(
                        "b4 separation must be positive, got {separation}"
                    )));
                }
                if !matches!((d, k_star), (2, 1) | (2, 2) | (4, 3)) {
                    return Err(Error::Config(format!(
                        "b4 (d, k_star) must be one of (2,1), (2,2), (4,3); got ({d},{k_star})"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Smoge { .. } => "smoge",
            Self::B2 => "b2",
            Self::B3 => "b3",
            Self::B4 { .. } => "b4",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Smoge { measure } => measure.dim(),
            Self::B2 => 2,
            Self::B3 => 6,
            Self::B4 { d, .. } => *d,
        }
    }

    /// Number of true experts.
    pub fn k_star(&self) -> usize {
        match self {
            Self::Smoge { measure } => measure.k(),
            Self::B2 => 2,
            Self::B3 => 4,
            Self::B4 { k_star, .. } => *k_star,
        }
    }

    /// Realizes the hard-gated truth, drawing slope noise from `rng` where the design has any.
    pub fn hard_gated_truth(&self, rng: &mut Rng) -> Option<HardGatedTruth> {
        match self {
            Self::Smoge { .. } => None,
            Self::B2 => Some(HardGatedTruth {
                logit_weights: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                logit_bias: vec![0.0, 0.0],
                intercepts: vec![2.0, -2.0],
                slopes: vec![vec![1.0, 1.0], vec![-1.0, -1.0]],
                variances: vec![1.0, 2.0],
            }),
            Self::B3 => {
                let (d, k) = (6, 4);
                Some(HardGatedTruth {
                    logit_weights: (0..k).map(|j| unit(d, j, 1.0)).collect(),
                    logit_bias: vec![0.0; k],
                    intercepts: (0..k).map(alternating).collect(),
                    slopes: (0..k).map(|j| noisy(unit(d, j, alternating(j)), 0.2, rng)).collect(),
                    variances: linspace(1.0, 2.0, k),
                })
            }
            Self::B4 { separation, d, k_star } => {
                let (d, k) = (*d, *k_star);
                Some(HardGatedTruth {
                    logit_weights: (0..k).map(|j| unit(d, j, *separation)).collect(),
                    logit_bias: (1..=k).map(|j| -0.2 * separation * j as f64).collect(),
                    intercepts: linspace(-2.0, 2.0, k),
                    slopes: (0..k).map(|j| noisy(unit(d, j, alternating(j)), 0.3, rng)).collect(),
                    variances: vec![0.8; k],
                })
            }
        }
    }
}

/// `2 (-1)^(k-1)` for 1-based `k`, i.e. `+2, -2, +2, …` for 0-based `j`.
fn alternating(j: usize) -> f64 {
    if j % 2 == 0 {
        2.0
    } else {
        -2.0
    }
}

fn unit(d: usize, j: usize, v: f64) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[j] = v;
    e
}

fn noisy(mut v: Vec<f64>, sd: f64, rng: &mut Rng) -> Vec<f64> {
    for c in &mut v {
        *c += sd * rng.sample::<f64, _>(StandardNormal);
    }
    v
}

/// Evenly spaced points; a single point sits at `lo`.
fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

fn uniform_x(rng: &mut Rng, d: usize, out: &mut Vec<f64>) {
    for _ in 0..d {
        out.push(rng.random_range(-1.0..=1.0));
    }
}

/// `n` iid draws `(x, y) ~ g_G`, recording the drawn component of every row.
pub fn sample_smoge<T: Scalar>(g: &MixingMeasure<T>, n: usize, seed: u64) -> Dataset<T> {
    let mut rng = seed::rng(seed);
    let d = g.dim();
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(d);
    for _ in 0..n {
        row.clear();
        uniform_x(&mut rng, d, &mut row);
        let x: Vec<T> = row.iter().map(|&v| T::lit(v)).collect();
        let w = g.gate_weights(&x).expect("dimension checked");
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut j = w.len() - 1;
        for (i, wi) in w.iter().enumerate() {
            acc += wi.to_f64_lossy();
            if u < acc {
                j = i;
                break;
            }
        }
        let c = g.component(j);
        let mean = g.family().mean(&c.beta, &x).to_f64_lossy();
        let eps: f64 = rng.sample(StandardNormal);
        ys.push(T::lit(mean + c.sigma2.to_f64_lossy().sqrt() * eps));
        xs.extend(x);
        z.push(j);
    }
    Dataset::new(d, xs, ys)
        .expect("generated rows are valid")
        .with_provenance(Provenance {
            dgp: "smoge".into(),
            seed: Some(seed),
            assignments: Some(z),
            truth: Some(Truth::Smoge { measure: g.cast() }),
        })
}

/// `n` draws from a generator spec. Hard-gated designs draw their slope
/// noise first from the same seed, so each seed is one replication.
pub fn sample_dgp(spec: &DgpSpec, n: usize, seed: u64) -> Result<Dataset<f64>> {
    spec.validate()?;
    if let DgpSpec::Smoge { measure } = spec {
        return Ok(sample_smoge(measure, n, seed));
    }
    let mut rng = seed::rng(seed);
    let truth = spec.hard_gated_truth(&mut rng).expect("hard-gated spec");
    let d = spec.dim();
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(d);
    for _ in 0..n {
        x.clear();
        uniform_x(&mut rng, d, &mut x);
        let k = truth.assign(&x);
        let mean = truth.intercepts[k] + truth.slopes[k].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        let eps: f64 = rng.sample(StandardNormal);
        ys.push(mean + truth.variances[k].sqrt() * eps);
        xs.extend_from_slice(&x);
        z.push(k);
    }
    Ok(Dataset::new(d, xs, ys)?.with_provenance(Provenance {
        dgp: spec.id().into(),
        seed: Some(seed),
        assignments: Some(z),
        truth: Some(Truth::HardGated(truth)),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExpertComponent, ExpertFamily};

    fn hard(spec: &DgpSpec) -> HardGatedTruth {
        spec.hard_gated_truth(&mut seed::rng(0)).unwrap()
    }

    #[test]
    fn b2_constants_and_assignment() {
        let t = hard(&DgpSpec::B2);
        assert_eq!(t.intercepts, vec![2.0, -2.0]);
        assert_eq!(t.slopes, vec![vec![1.0, 1.0], vec![-1.0, -1.0]]);
        assert_eq!(t.variances, vec![1.0, 2.0]);
        assert_eq!(t.assign(&[0.5, -0.5]), 0);
        let data = sample_dgp(&DgpSpec::B2, 400, 5).unwrap();
        let z = data.provenance.assignments.as_ref().unwrap();
        for (i, (x, _)) in data.rows().enumerate() {
            assert_eq!(z[i], if x[0] > x[1] { 0 } else { 1 });
        }
    }

    #[test]
    fn b3_constants() {
        let t = hard(&DgpSpec::B3);
        assert_eq!(t.intercepts, vec![2.0, -2.0, 2.0, -2.0]);
        let v = &t.variances;
        assert!((v[0] - 1.0).abs() < 1e-15 && (v[1] - 4.0 / 3.0).abs() < 1e-15 && (v[3] - 2.0).abs() < 1e-15);
        // diagonal base 2(-1)^(k-1) plus N(0, 0.2²) noise
        for (k, s) in t.slopes.iter().enumerate() {
            assert_eq!(s.len(), 6);
            assert!((s[k] - alternating(k)).abs() < 1.2);
        }
        let data = sample_dgp(&DgpSpec::B3, 200, 1).unwrap();
        let z = data.provenance.assignments.as_ref().unwrap();
        for (i, (x, _)) in data.rows().enumerate() {
            let best = (0..4).max_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap()).unwrap();
            assert_eq!(z[i], best);
        }
    }

    #[test]
    fn b4_constants() {
        let t = hard(&DgpSpec::B4 {
            separation: 5.0,
            d: 2,
            k_star: 2,
        });
        assert_eq!(t.logit_bias, vec![-1.0, -2.0]);
        assert_eq!(t.logit_weights, vec![vec![5.0, 0.0], vec![0.0, 5.0]]);
        assert_eq!(t.intercepts, vec![-2.0, 2.0]);
        assert_eq!(t.variances, vec![0.8, 0.8]);
        let t3 = hard(&DgpSpec::B4 {
            separation: 10.0,
            d: 4,
            k_star: 3,
        });
        assert_eq!(t3.intercepts, vec![-2.0, 0.0, 2.0]);
        assert_eq!(t3.logit_bias, vec![-2.0, -4.0, -6.0]);
        assert_eq!(t3.logit_weights[2], vec![0.0, 0.0, 10.0, 0.0]);
        let t1 = hard(&DgpSpec::B4 {
            separation: 5.0,
            d: 2,
            k_star: 1,
        });
        assert_eq!(t1.k(), 1);
    }

    #[test]
    fn b4_rejects_bad_configurations() {
        for spec in [
            DgpSpec::B4 {
                separation: 0.0,
                d: 2,
                k_star: 2,
            },
            DgpSpec::B4 {
                separation: 5.0,
                d: 3,
                k_star: 2,
            },
            DgpSpec::B4 {
                separation: 5.0,
                d: 4,
                k_star: 4,
            },
        ] {
            assert!(matches!(sample_dgp(&spec, 10, 0), Err(Error::Config(_))));
        }
    }

    #[test]
    fn slope_noise_differs_across_replication_seeds() {
        let spec = DgpSpec::B4 {
            separation: 5.0,
            d: 2,
            k_star: 2,
        };
        let a = sample_dgp(&spec, 5, seed::derive(1, &[0])).unwrap();
        let b = sample_dgp(&spec, 5, seed::derive(1, &[1])).unwrap();
        let slopes = |d: &Dataset<f64>| match &d.provenance.truth {
            Some(Truth::HardGated(t)) => t.slopes.clone(),
            _ => unreachable!(),
        };
        assert_ne!(slopes(&a), slopes(&b));
    }

    fn sym2() -> MixingMeasure<f64> {
        MixingMeasure::new(
            ExpertFamily::Linear,
            1,
            vec![
                ExpertComponent::new(0.0, vec![0.0], vec![1.0, 0.0], 1.0),
                ExpertComponent::new(0.0, vec![0.0], vec![-1.0, 0.0], 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn smoge_sampling_examples() {
        assert!(sample_smoge(&sym2(), 0, 1).is_empty());
        let single = MixingMeasure::new(
            ExpertFamily::Linear,
            2,
            vec![ExpertComponent::new(0.3, vec![1.0, 1.0], vec![0.0; 3], 1.0)],
        )
        .unwrap();
        let d = sample_smoge(&single, 50, 3);
        assert!(d.provenance.assignments.as_ref().unwrap().iter().all(|&z| z == 0));
        assert!(d.x_flat().iter().all(|v: &f64| v.abs() <= 1.0));

        // binomial oracle: frequency within 3 standard errors of 1/2
        let n = 10_000;
        let d = sample_smoge(&sym2(), n, 17);
        let ones = d
            .provenance
            .assignments
            .as_ref()
            .unwrap()
            .iter()
            .filter(|&&z| z == 0)
            .count();
        let se = (0.25 / n as f64).sqrt();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn smoge_sampling_is_deterministic() {
        let a = sample_smoge(&sym2(), 300, 99);
        let b = sample_smoge(&sym2(), 300, 99);
        assert_eq!(a, b);
        let bits = |d: &Dataset<f64>| d.y().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&sample_smoge(&sym2(), 300, 100)));
    }

    #[test]
    fn smoge_sampling_f32() {
        let d = sample_smoge(&sym2().cast::<f32>(), 20, 4);
        assert_eq!(d.len(), 20);
    }
}
