use rand_distr::{Distribution, StandardNormal};

use super::joint::{log_joint_impl, Scratch};
use super::layout::ParamLayout;
use super::prior::PriorConfig;
use super::state::VariationalState;
use crate::error::{check_dim, Error, Result};
use crate::model::Dataset;
use crate::seed::{self, Rng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElboEstimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElboGradient {
    pub value: f64,
    pub std_error: f64,
    pub d_mean: Vec<f64>,
    pub d_log_std: Vec<f64>,
}

/// Reusable buffers for repeated ELBO evaluations on one layout.
pub(crate) struct Workspace {
    layout: ParamLayout,
    scratch: Scratch,
    eps: Vec<f64>,
    theta: Vec<f64>,
    grad: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(layout: ParamLayout) -> Self {
        let n = layout.len();
        Self {
            layout,
            scratch: Scratch::new(&layout),
            eps: vec![0.0; n],
            theta: vec![0.0; n],
            grad: vec![0.0; n],
        }
    }

    /// Draws one `ε`, evaluates `log p(data, θ) + H(q)` and, if requested,
    /// accumulates `weight ×` the pathwise gradient into `d_mean`/`d_log_std`.
    pub(crate) fn sample(
        &mut self,
        q: &VariationalState,
        data: &Dataset<f64>,
        prior: &PriorConfig,
        rng: &mut Rng,
        grads: Option<(&mut [f64], &mut [f64], f64)>,
    ) -> f64 {
        for e in self.eps.iter_mut() {
            *e = StandardNormal.sample(rng);
        }
        q.reparameterize(&self.eps, &mut self.theta);
        let want = grads.is_some();
        let lj = log_joint_impl(
            &self.layout,
            &self.theta,
            data,
            prior,
            if want { Some(&mut self.grad) } else { None },
            &mut self.scratch,
        );
        if let Some((dm, ds, w)) = grads {
            for i in 0..self.theta.len() {
                let sd = q.log_std[i].exp();
                dm[i] += w * self.grad[i];
                ds[i] += w * (self.grad[i] * self.eps[i] * sd + 1.0);
            }
        }
        lj + q.entropy()
    }

    /// Coordinate of the last drawn `θ` (or gradient) that is not finite.
    pub(crate) fn offending_index(&self) -> Option<usize> {
        self.theta
            .iter()
            .position(|v| !v.is_finite())
            .or_else(|| self.grad.iter().position(|v| !v.is_finite()))
    }
}

fn check(q: &VariationalState, data: &Dataset<f64>, prior: &PriorConfig, s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::Argument(
            "number of Monte Carlo samples must be at least 1".into(),
        ));
    }
    let layout = q.layout();
    check_dim(layout.len(), q.mean.len())?;
    check_dim(layout.len(), q.log_std.len())?;
    if !data.is_empty() {
        check_dim(layout.d, data.dim())?;
    }
    prior.validate()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo ELBO `E_q[log p(data, θ) − log q(θ)]` from `s` location-scale
/// draws seeded by `seed`. The `−E_q[log q]` part is the closed-form Gaussian
/// entropy, so the estimate is exact when `q` collapses to a point.
pub fn elbo_estimate(
    q: &VariationalState,
    data: &Dataset<f64>,
    prior: &PriorConfig,
    s: usize,
    seed: u64,
) -> Result<ElboEstimate> {
    check(q, data, prior, s)?;
    let mut ws = Workspace::new(q.layout());
    let mut rng = seed::rng(seed);
    let values: Vec<f64> = (0..s).map(|_| ws.sample(q, data, prior, &mut rng, None)).collect();
    let (value, std_error) = mean_and_se(&values);
    Ok(ElboEstimate { value, std_error })
}

/// Pathwise gradient of [`elbo_estimate`] with respect to the variational
/// means and log standard deviations, using the same draws as the estimate
/// with the same seed.
pub fn elbo_gradient(
    q: &VariationalState,
    data: &Dataset<f64>,
    prior: &PriorConfig,
    s: usize,
    seed: u64,
) -> Result<ElboGradient> {
    check(q, data, prior, s)?;
    let mut ws = Workspace::new(q.layout());
    let mut rng = seed::rng(seed);
    let mut d_mean = vec![0.0; q.len()];
    let mut d_log_std = vec![0.0; q.len()];
    let w = 1.0 / s as f64;
    let values: Vec<f64> = (0..s)
        .map(|_| ws.sample(q, data, prior, &mut rng, Some((&mut d_mean, &mut d_log_std, w))))
        .collect();
    let (value, std_error) = mean_and_se(&values);
    Ok(ElboGradient {
        value,
        std_error,
        d_mean,
        d_log_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_smoge, ExpertFamily, ParamBounds, ParamRole};
    use rand::Rng as _;
    use statrs::function::gamma::ln_gamma;

    fn empty(d: usize) -> Dataset<f64> {
        Dataset::new(d, vec![], vec![]).unwrap()
    }

    /// q equal to the prior on every Gaussian coordinate, `N(m, v)` on each `log σ²`.
    fn prior_matched(layout: ParamLayout, prior: &PriorConfig, m: f64, v: f64) -> VariationalState {
        let mut mean = vec![0.0; layout.len()];
        let mut log_std = vec![0.0; layout.len()];
        for j in 0..layout.k {
            log_std[layout.alpha0(j)] = 0.5 * prior.gating_var.ln();
            for u in 0..layout.d {
                log_std[layout.alpha1(j) + u] = 0.5 * prior.gating_var.ln();
            }
            for t in 0..layout.p {
                let var = match layout.family.param_role(t) {
                    ParamRole::Intercept => prior.intercept_var,
                    ParamRole::Slope => prior.slope_var,
                };
                log_std[layout.beta(j) + t] = 0.5 * var.ln();
            }
            mean[layout.log_sigma2(j)] = m;
            log_std[layout.log_sigma2(j)] = 0.5 * v.ln();
        }
        VariationalState::new(layout, mean, log_std).unwrap()
    }

    #[test]
    fn determinism() {
        let l = ParamLayout::new(ExpertFamily::Linear, 2, 2);
        let q = VariationalState::init(l, 3);
        let g = l.to_measure(&q.mean, &ParamBounds::default()).unwrap();
        let data = sample_smoge(&g, 20, 1);
        let p = PriorConfig::default();
        assert_eq!(
            elbo_estimate(&q, &data, &p, 1, 5).unwrap(),
            elbo_estimate(&q, &data, &p, 1, 5).unwrap()
        );
    }

    #[test]
    fn point_mass_limit() {
        let l = ParamLayout::new(ExpertFamily::Linear, 2, 1);
        let mut q = VariationalState::init(l, 3);
        q.log_std.iter_mut().for_each(|s| *s = -20.0);
        let g = l.to_measure(&q.mean, &ParamBounds::default()).unwrap();
        let data = sample_smoge(&g, 30, 2);
        let p = PriorConfig::default();
        let est = elbo_estimate(&q, &data, &p, 50, 8).unwrap();
        let expected = super::super::joint::log_joint(&l, &q.mean, &data, &p).unwrap() + q.entropy();
        assert!((est.value - expected).abs() < 1e-6, "{} vs {expected}", est.value);
        assert!(est.std_error < 1e-6);
    }

    #[test]
    fn prior_matched_gaussian_blocks_contribute_nothing() {
        // With n = 0 and q = prior on the Gaussian blocks the ELBO reduces to
        // the log σ² block: E_q[log p(s)] + H(q_s) in closed form.
        let prior = PriorConfig::default();
        let l = ParamLayout::new(ExpertFamily::Linear, 2, 2);
        let (m, v) = (0.3, 0.4);
        let q = prior_matched(l, &prior, m, v);
        let (a, b) = (prior.sigma2_shape, prior.sigma2_rate);
        let per = a * b.ln() - ln_gamma(a) - a * m - b * (-m + v / 2.0).exp()
            + 0.5 * v.ln()
            + 0.5 * (1.0 + std::f64::consts::TAU.ln());
        let est = elbo_estimate(&q, &empty(2), &prior, 20_000, 11).unwrap();
        assert!(
            (est.value - 2.0 * per).abs() < 3.0 * est.std_error + 1e-12,
            "{} vs {}",
            est.value,
            2.0 * per
        );

        // per-draw gradients are -ε/sd (mean) and 1 - ε² (log std)
        let s = 20_000.0f64;
        let grad = elbo_gradient(&q, &empty(2), &prior, 20_000, 12).unwrap();
        for i in 0..l.len() {
            if l.block_of(i) != super::super::layout::Block::LogSigma2 {
                let sd = q.log_std[i].exp();
                assert!(grad.d_mean[i].abs() < 3.0 / (sd * s.sqrt()), "mean coord {i}");
                assert!(grad.d_log_std[i].abs() < 3.0 * (2.0 / s).sqrt(), "log std coord {i}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = crate::seed::rng(77);
        let prior = PriorConfig::default();
        let mut worst: f64 = 0.0;
        for inst in 0..20u64 {
            let family = [ExpertFamily::Linear, ExpertFamily::Sigmoid][inst as usize % 2];
            let l = ParamLayout::new(family, 1 + inst as usize % 3, 1 + inst as usize % 2);
            let mean: Vec<f64> = (0..l.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let log_std: Vec<f64> = (0..l.len()).map(|_| rng.random_range(-3.0..-0.5)).collect();
            let q = VariationalState::new(l, mean, log_std).unwrap();
            let g = l.to_measure(&q.mean, &ParamBounds::default()).unwrap();
            let data = sample_smoge(&g, 8, inst);
            let seed = 1000 + inst;
            let grad = elbo_gradient(&q, &data, &prior, 2, seed).unwrap();
            let h = 1e-5;
            for i in 0..l.len() {
                for (which, analytic) in [(0, grad.d_mean[i]), (1, grad.d_log_std[i])] {
                    let mut qp = q.clone();
                    let mut qm = q.clone();
                    let (p, m) = if which == 0 {
                        (&mut qp.mean, &mut qm.mean)
                    } else {
                        (&mut qp.log_std, &mut qm.log_std)
                    };
                    p[i] += h;
                    m[i] -= h;
                    let fd = (elbo_estimate(&qp, &data, &prior, 2, seed).unwrap().value
                        - elbo_estimate(&qm, &data, &prior, 2, seed).unwrap().value)
                        / (2.0 * h);
                    let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1.0);
                    worst = worst.max(rel);
                }
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn zero_sample_count_rejected() {
        let l = ParamLayout::new(ExpertFamily::Linear, 1, 1);
        let q = VariationalState::init(l, 0);
        assert!(elbo_estimate(&q, &empty(1), &PriorConfig::default(), 0, 0).is_err());
    }
}
