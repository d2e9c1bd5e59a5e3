//! End-to-end checks on the two-expert hard-gated design.

use smoge::contraction::{default_proposal_scale, mh_sample, MhConfig};
use smoge::model::sample_dgp;
use smoge::selection::{run_selection, SelectionConfig};
use smoge::vi::{fit, FitConfig, LearningRate, PriorConfig};
use smoge::DgpSpec;

#[test]
fn two_experts_beat_one_at_n_100() {
    let cfg = SelectionConfig::new(DgpSpec::B2, 100, vec![1, 2], 20, 31);
    let r = run_selection(&cfg).unwrap();
    assert!(r.failed.is_empty());
    let p = r.proportion_of(2).unwrap();
    assert!(p >= 0.8, "K=2 won {p:.2} of replications");
}

#[test]
fn mh_acceptance_is_calibrated() {
    let prior = PriorConfig::default();
    for (n, s) in [(25, 1u64), (100, 2)] {
        let data = sample_dgp(&DgpSpec::B2, n, s).unwrap();
        let vi = fit(&data, 2, &prior, &FitConfig::new(2000, LearningRate::constant(0.01), s)).unwrap();
        let cfg = MhConfig::new(4000, default_proposal_scale(n), s);
        let chain = mh_sample(&data, 2, &prior, &cfg, Some(&vi.final_state.mean)).unwrap();
        assert!(
            (0.1..=0.6).contains(&chain.acceptance_rate),
            "n={n}: acceptance {}",
            chain.acceptance_rate
        );
        assert!(!chain.low_acceptance);
        assert_eq!(chain.kept().len(), 2000);
    }
}
