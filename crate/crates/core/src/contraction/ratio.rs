use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rates::{median, Target};
use crate::divergences::hellinger_sq_mc;
use crate::error::{Error, Result};
use crate::identifiability::check_assumption4;
use crate::model::{ExpertComponent, ExpertFamily, MixingMeasure};
use crate::seed::{self, tag, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioScanConfig {
    pub eps_list: Vec<f64>,
    pub trials_per_eps: usize,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    pub seed: u64,
}

fn default_n_mc() -> usize {
    crate::divergences::DEFAULT_N_MC
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioScanRow {
    pub eps: f64,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub ratios: Vec<f64>,
    /// Achieved Voronoi loss per trial (close to `eps`).
    pub losses: Vec<f64>,
    /// Trials whose Hellinger standard error stayed above 10% after the rerun.
    pub flagged_trials: Vec<usize>,
}

fn target_for(family: &ExpertFamily<f64>) -> Result<Target> {
    match family {
        ExpertFamily::Linear => Ok(Target::ExactSpecified),
        ExpertFamily::Sigmoid => Ok(Target::OverSpecified),
        ExpertFamily::Constant { .. } => Err(Error::Unsupported(
            "ratio scan is defined for linear and sigmoid experts".into(),
        )),
    }
}

/// Base atoms of the perturbed measure: `g_star` itself, or with atom 0
/// split into two half-weight copies for the over-specified scan.
fn base_atoms(g_star: &MixingMeasure<f64>, target: Target) -> Vec<ExpertComponent<f64>> {
    let mut atoms = g_star.components().to_vec();
    if target == Target::OverSpecified {
        atoms[0].alpha0 -= std::f64::consts::LN_2;
        let copy = atoms[0].clone();
        atoms.insert(1, copy);
    }
    atoms
}

/// Random unit direction over `(log weight, α1, β, σ²)` of every atom, with
/// the last atom's gating held fixed so the gating stays normalized.
fn direction(atoms: &[ExpertComponent<f64>], rng: &mut Rng) -> Vec<ExpertComponent<f64>> {
    let k = atoms.len();
    let mut dir: Vec<ExpertComponent<f64>> = atoms
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let mut z = || -> f64 { StandardNormal.sample(rng) };
            let pinned = j == k - 1;
            let alpha0 = if pinned { 0.0 } else { z() };
            let alpha1 = a.alpha1.iter().map(|_| if pinned { 0.0 } else { z() }).collect();
            let beta = a.beta.iter().map(|_| z()).collect();
            ExpertComponent::new(alpha0, alpha1, beta, z())
        })
        .collect();
    let norm = dir
        .iter()
        .flat_map(|c| {
            std::iter::once(c.alpha0)
                .chain(c.alpha1.iter().copied())
                .chain(c.beta.iter().copied())
                .chain([c.sigma2])
        })
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    for c in &mut dir {
        c.alpha0 /= norm;
        c.alpha1.iter_mut().for_each(|v| *v /= norm);
        c.beta.iter_mut().for_each(|v| *v /= norm);
        c.sigma2 /= norm;
    }
    dir
}

fn step(atoms: &[ExpertComponent<f64>], dir: &[ExpertComponent<f64>], t: f64) -> Vec<ExpertComponent<f64>> {
    atoms
        .iter()
        .zip(dir)
        .map(|(a, u)| {
            ExpertComponent::new(
                a.alpha0 + t * u.alpha0,
                a.alpha1.iter().zip(&u.alpha1).map(|(x, y)| x + t * y).collect(),
                a.beta.iter().zip(&u.beta).map(|(x, y)| x + t * y).collect(),
                a.sigma2 + t * u.sigma2,
            )
        })
        .collect()
}

/// Finds `G` on a random ray from `g_star` (or its split version) whose
/// Voronoi loss is `eps`, by bisection on the step length. Rays that cannot
/// reach `eps` while keeping every `σ²` above half its base value are redrawn.
fn perturb_to_loss(
    g_star: &MixingMeasure<f64>,
    target: Target,
    eps: f64,
    rng: &mut Rng,
) -> Result<(MixingMeasure<f64>, f64)> {
    let atoms = base_atoms(g_star, target);
    for _ in 0..100 {
        let dir = direction(&atoms, rng);
        let t_max = atoms
            .iter()
            .zip(&dir)
            .filter(|(_, u)| u.sigma2 < 0.0)
            .map(|(a, u)| 0.5 * a.sigma2 / -u.sigma2)
            .fold(1e3, f64::min);
        let loss_at = |t: f64| -> Result<f64> {
            let g = g_star.with_components(step(&atoms, &dir, t))?;
            Ok(target.loss(&g, g_star)?.total)
        };
        if loss_at(t_max)? < eps {
            continue;
        }
        let (mut lo, mut hi) = (0.0, t_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if loss_at(mid)? < eps {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) <= 1e-14 * hi {
                break;
            }
        }
        let g = g_star.with_components(step(&atoms, &dir, hi))?;
        let loss = target.loss(&g, g_star)?.total;
        return Ok((g, loss));
    }
    Err(Error::Argument(format!(
        "could not reach loss {eps} along random directions"
    )))
}

/// For each `eps`, draws `trials_per_eps` perturbations of `g_star` at
/// Voronoi loss `≈ eps` (`L1` with `K = K*` for linear experts, `L2` with one
/// atom split for sigmoid experts) and reports `d_H / loss`.
///
/// A trial whose Monte Carlo standard error exceeds 10% of `d_H²` is rerun
/// with four times the samples and flagged if it is still too noisy.
pub fn hellinger_voronoi_ratio_scan(g_star: &MixingMeasure<f64>, cfg: &RatioScanConfig) -> Result<Vec<RatioScanRow>> {
    let target = target_for(g_star.family())?;
    if cfg.eps_list.is_empty() || cfg.eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::Argument(
            "eps_list must be non-empty with positive entries".into(),
        ));
    }
    if cfg.eps_list.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Argument("eps_list must be strictly decreasing".into()));
    }
    if cfg.trials_per_eps == 0 || cfg.n_mc == 0 {
        return Err(Error::Argument("trials_per_eps and n_mc must be at least 1".into()));
    }
    if !g_star.is_gating_normalized() {
        return Err(Error::Argument("the true measure must have normalized gating".into()));
    }
    let a4 = check_assumption4(g_star, 1e-9);
    if !a4.passes() {
        return Err(Error::Argument(format!(
            "true measure violates distinctness: {:?}",
            a4.violations
        )));
    }

    cfg.eps_list
        .iter()
        .enumerate()
        .map(|(e_idx, &eps)| {
            let trials: Vec<Result<(f64, f64, bool)>> = (0..cfg.trials_per_eps)
                .into_par_iter()
                .map(|t| {
                    let path = [e_idx as u64, t as u64];
                    let mut rng = seed::rng(seed::derive(cfg.seed, &[tag::TRIAL, path[0], path[1]]));
                    let (g, loss) = perturb_to_loss(g_star, target, eps, &mut rng)?;
                    let h_seed = seed::derive(cfg.seed, &[tag::HELLINGER, path[0], path[1]]);
                    let mut h = hellinger_sq_mc(&g, g_star, cfg.n_mc, h_seed)?;
                    let noisy = |h: &crate::divergences::DivergenceEstimate| h.std_error > 0.1 * h.value;
                    let mut flagged = false;
                    if noisy(&h) {
                        h = hellinger_sq_mc(&g, g_star, 4 * cfg.n_mc, seed::derive(h_seed, &[1]))?;
                        flagged = noisy(&h);
                    }
                    Ok((h.value.max(0.0).sqrt() / loss, loss, flagged))
                })
                .collect();
            let trials: Vec<(f64, f64, bool)> = trials.into_iter().collect::<Result<_>>()?;
            let ratios: Vec<f64> = trials.iter().map(|t| t.0).collect();
            Ok(RatioScanRow {
                eps,
                min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
                median_ratio: median(&ratios),
                losses: trials.iter().map(|t| t.1).collect(),
                flagged_trials: trials.iter().enumerate().filter(|(_, t)| t.2).map(|(i, _)| i).collect(),
                ratios,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigmoid_truth() -> MixingMeasure<f64> {
        MixingMeasure::new(
            ExpertFamily::Sigmoid,
            2,
            vec![
                ExpertComponent::new(0.4, vec![1.0, -0.5], vec![2.0, -1.0], 0.3),
                ExpertComponent::new(0.0, vec![0.0, 0.0], vec![-1.5, 1.0], 0.2),
            ],
        )
        .unwrap()
    }

    #[test]
    fn perturbation_hits_requested_loss() {
        let g = sigmoid_truth();
        let mut rng = seed::rng(3);
        for eps in [0.1, 0.01] {
            let (p, loss) = perturb_to_loss(&g, Target::OverSpecified, eps, &mut rng).unwrap();
            assert_eq!(p.k(), 3);
            assert!(p.is_gating_normalized());
            assert!((loss - eps).abs() < 1e-9 * eps.max(1.0), "{loss} vs {eps}");
        }
    }

    #[test]
    fn split_base_has_zero_loss() {
        let g = sigmoid_truth();
        let atoms = base_atoms(&g, Target::OverSpecified);
        let split = g.with_components(atoms).unwrap();
        assert!(crate::voronoi::loss_l2(&split, &g).unwrap().total.abs() < 1e-12);
    }

    #[test]
    fn small_scan_is_positive_and_stable() {
        let cfg = RatioScanConfig {
            eps_list: vec![0.1, 0.01],
            trials_per_eps: 4,
            n_mc: 20_000,
            seed: 9,
        };
        let rows = hellinger_voronoi_ratio_scan(&sigmoid_truth(), &cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.min_ratio > 0.0));
    }

    #[test]
    fn rejects_bad_eps_and_family() {
        let g = sigmoid_truth();
        let bad = RatioScanConfig {
            eps_list: vec![0.01, 0.1],
            trials_per_eps: 1,
            n_mc: 10,
            seed: 0,
        };
        assert!(hellinger_voronoi_ratio_scan(&g, &bad).is_err());
        let zero = RatioScanConfig {
            eps_list: vec![0.0],
            ..bad.clone()
        };
        assert!(hellinger_voronoi_ratio_scan(&g, &zero).is_err());
        let c = g.cast::<f64>();
        let constant = MixingMeasure::new(ExpertFamily::Constant { level: 0.0 }, 2, c.components().to_vec()).unwrap();
        let ok = RatioScanConfig {
            eps_list: vec![0.1],
            ..bad
        };
        assert!(matches!(
            hellinger_voronoi_ratio_scan(&constant, &ok),
            Err(Error::Unsupported(_))
        ));
    }
}
