//! Log joint density `log p(data, θ)` over the flat parameterization with
//! `log σ²` coordinates, and its analytic gradient.

use super::layout::ParamLayout;
use super::prior::PriorConfig;
use crate::error::{check_dim, Error, Result};
use crate::model::{Dataset, ParamRole};

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7;

/// Reusable per-component buffers for the likelihood sweep.
pub(crate) struct Scratch {
    logit: Vec<f64>,
    mean: Vec<f64>,
    term: Vec<f64>,
    mean_grad: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(layout: &ParamLayout) -> Self {
        Self {
            logit: vec![0.0; layout.k],
            mean: vec![0.0; layout.k],
            term: vec![0.0; layout.k],
            mean_grad: vec![0.0; layout.k * layout.p],
        }
    }
}

/// `log p(data, θ)` and, when `grad` is given, `∂/∂θ` written into it.
pub(crate) fn log_joint_impl(
    layout: &ParamLayout,
    theta: &[f64],
    data: &Dataset<f64>,
    prior: &PriorConfig,
    mut grad: Option<&mut [f64]>,
    scratch: &mut Scratch,
) -> f64 {
    let (k, d, p) = (layout.k, layout.d, layout.p);
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut total = 0.0;

    // priors
    for j in 0..k {
        let (v, dv) = PriorConfig::gaussian(theta[layout.alpha0(j)], prior.gating_var);
        total += v;
        if let Some(g) = grad.as_deref_mut() {
            g[layout.alpha0(j)] += dv;
        }
        for u in 0..d {
            let i = layout.alpha1(j) + u;
            let (v, dv) = PriorConfig::gaussian(theta[i], prior.gating_var);
            total += v;
            if let Some(g) = grad.as_deref_mut() {
                g[i] += dv;
            }
        }
        for v_idx in 0..p {
            let i = layout.beta(j) + v_idx;
            let var = match layout.family.param_role(v_idx) {
                ParamRole::Intercept => prior.intercept_var,
                ParamRole::Slope => prior.slope_var,
            };
            let (v, dv) = PriorConfig::gaussian(theta[i], var);
            total += v;
            if let Some(g) = grad.as_deref_mut() {
                g[i] += dv;
            }
        }
        let i = layout.log_sigma2(j);
        let (v, dv) = prior.log_sigma2(theta[i]);
        total += v;
        if let Some(g) = grad.as_deref_mut() {
            g[i] += dv;
        }
    }

    // likelihood
    let inv_var: Vec<f64> = (0..k).map(|j| (-theta[layout.log_sigma2(j)]).exp()).collect();
    for (x, &y) in data.rows() {
        let mut max_logit = f64::NEG_INFINITY;
        for j in 0..k {
            let a1 = &theta[layout.alpha1(j)..layout.alpha1(j) + d];
            let l = theta[layout.alpha0(j)] + a1.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            scratch.logit[j] = l;
            max_logit = max_logit.max(l);
            let beta = &theta[layout.beta(j)..layout.beta(j) + p];
            scratch.mean[j] = if grad.is_some() {
                layout
                    .family
                    .mean_and_grad(beta, x, &mut scratch.mean_grad[j * p..(j + 1) * p])
            } else {
                layout.family.mean(beta, x)
            };
        }
        let gate_norm = max_logit + scratch.logit.iter().map(|l| (l - max_logit).exp()).sum::<f64>().ln();
        let mut max_term = f64::NEG_INFINITY;
        for j in 0..k {
            let r = y - scratch.mean[j];
            let t = scratch.logit[j]
                - gate_norm
                - HALF_LN_TAU
                - 0.5 * theta[layout.log_sigma2(j)]
                - 0.5 * r * r * inv_var[j];
            scratch.term[j] = t;
            max_term = max_term.max(t);
        }
        let row_ll = max_term + scratch.term.iter().map(|t| (t - max_term).exp()).sum::<f64>().ln();
        total += row_ll;

        if let Some(g) = grad.as_deref_mut() {
            for j in 0..k {
                let resp = (scratch.term[j] - row_ll).exp();
                let gate = (scratch.logit[j] - gate_norm).exp();
                let dl = resp - gate;
                g[layout.alpha0(j)] += dl;
                let a1 = layout.alpha1(j);
                for u in 0..d {
                    g[a1 + u] += dl * x[u];
                }
                let r = y - scratch.mean[j];
                let dmean = resp * r * inv_var[j];
                let b = layout.beta(j);
                for v in 0..p {
                    g[b + v] += dmean * scratch.mean_grad[j * p + v];
                }
                g[layout.log_sigma2(j)] += resp * (0.5 * r * r * inv_var[j] - 0.5);
            }
        }
    }
    total
}

fn check_inputs(layout: &ParamLayout, theta: &[f64], data: &Dataset<f64>, prior: &PriorConfig) -> Result<()> {
    check_dim(layout.len(), theta.len())?;
    if !data.is_empty() {
        check_dim(layout.d, data.dim())?;
    }
    prior.validate()?;
    if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
        return Err(Error::Argument(format!(
            "non-finite parameter in block {}",
            layout.block_of(i).name()
        )));
    }
    Ok(())
}

/// `log p(data, θ)`: log-likelihood plus Gaussian log-priors on gating and
/// regression coordinates plus the Inverse-Gamma log-prior on each `σ²`
/// expressed in `log σ²` (Jacobian included).
pub fn log_joint(layout: &ParamLayout, theta: &[f64], data: &Dataset<f64>, prior: &PriorConfig) -> Result<f64> {
    check_inputs(layout, theta, data, prior)?;
    Ok(log_joint_impl(
        layout,
        theta,
        data,
        prior,
        None,
        &mut Scratch::new(layout),
    ))
}

/// [`log_joint`] together with its gradient.
pub fn log_joint_grad(
    layout: &ParamLayout,
    theta: &[f64],
    data: &Dataset<f64>,
    prior: &PriorConfig,
) -> Result<(f64, Vec<f64>)> {
    check_inputs(layout, theta, data, prior)?;
    let mut grad = vec![0.0; layout.len()];
    let v = log_joint_impl(layout, theta, data, prior, Some(&mut grad), &mut Scratch::new(layout));
    Ok((v, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_smoge, ExpertComponent, ExpertFamily, MixingMeasure, ParamBounds};
    use rand::Rng;

    fn empty(d: usize) -> Dataset<f64> {
        Dataset::new(d, vec![], vec![]).unwrap()
    }

    #[test]
    fn prior_only_golden_value() {
        // K=2, d=1 linear: 2·(1 + 1 + 2) Gaussian coordinates, 2 variance coordinates
        let layout = ParamLayout::new(ExpertFamily::Linear, 2, 1);
        let theta = vec![0.0; layout.len()];
        let gaussian_coords = 2 * (1 + 1 + 2);
        let expected = gaussian_coords as f64 * (-0.5 * (std::f64::consts::TAU * 10.0).ln()) + 2.0 * (4f64.ln() - 2.0);
        let v = log_joint(&layout, &theta, &empty(1), &PriorConfig::default()).unwrap();
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
    }

    #[test]
    fn doubling_gating_variance_shifts_by_half_log_two_per_coordinate() {
        let layout = ParamLayout::new(ExpertFamily::Linear, 2, 2);
        let theta: Vec<f64> = (0..layout.len())
            .map(|i| if i < layout.alpha1(0) + 2 * 2 { 0.0 } else { 0.3 })
            .collect();
        let p1 = PriorConfig::default();
        let p2 = PriorConfig { gating_var: 20.0, ..p1 };
        let a = log_joint(&layout, &theta, &empty(2), &p1).unwrap();
        let b = log_joint(&layout, &theta, &empty(2), &p2).unwrap();
        let gating_coords = 2.0 * (1.0 + 2.0);
        assert!((a - b - gating_coords * 0.5 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn likelihood_part_is_additive_and_matches_measure() {
        let g = MixingMeasure::new(
            ExpertFamily::Linear,
            2,
            vec![
                ExpertComponent::new(0.4, vec![1.0, -1.0], vec![1.0, 0.5, 0.0], 0.7),
                ExpertComponent::new(0.0, vec![0.0, 0.0], vec![-1.0, 0.0, 1.0], 1.3),
            ],
        )
        .unwrap();
        let (layout, theta) = ParamLayout::from_measure(&g);
        let prior = PriorConfig::default();
        let d1 = sample_smoge(&g, 30, 1);
        let d2 = sample_smoge(&g, 20, 2);
        let p0 = log_joint(&layout, &theta, &empty(2), &prior).unwrap();
        let l1 = log_joint(&layout, &theta, &d1, &prior).unwrap() - p0;
        let l2 = log_joint(&layout, &theta, &d2, &prior).unwrap() - p0;
        let l12 = log_joint(&layout, &theta, &d1.concat(&d2).unwrap(), &prior).unwrap() - p0;
        assert!((l12 - l1 - l2).abs() < 1e-9);
        assert!((l1 - g.log_likelihood(&d1).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn non_finite_theta_rejected() {
        let layout = ParamLayout::new(ExpertFamily::Linear, 1, 1);
        let mut theta = vec![0.0; layout.len()];
        theta[layout.beta(0)] = f64::NAN;
        assert!(matches!(
            log_joint(&layout, &theta, &empty(1), &PriorConfig::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences_all_families() {
        let mut rng = crate::seed::rng(4);
        for family in [
            ExpertFamily::Linear,
            ExpertFamily::Sigmoid,
            ExpertFamily::Constant { level: 0.5 },
        ] {
            let layout = ParamLayout::new(family, 3, 2);
            let theta: Vec<f64> = (0..layout.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = layout.to_measure(&theta, &ParamBounds::default()).unwrap();
            let data = sample_smoge(&g, 15, 8);
            let prior = PriorConfig::default();
            let (_, grad) = log_joint_grad(&layout, &theta, &data, &prior).unwrap();
            let h = 1e-6;
            for i in 0..layout.len() {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[i] += h;
                tm[i] -= h;
                let fd = (log_joint(&layout, &tp, &data, &prior).unwrap()
                    - log_joint(&layout, &tm, &data, &prior).unwrap())
                    / (2.0 * h);
                assert!(
                    (fd - grad[i]).abs() < 1e-5 * grad[i].abs().max(1.0),
                    "{family:?} coord {i}: {fd} vs {}",
                    grad[i]
                );
            }
        }
    }
}
