use driftval::curves::LearningCurveFit;
use driftval::{
    equivalent_time, flow_scaling_analysis, sequential_offload, substitution, CategoricalDistribution, DriftPath,
    Evaluation, Experiment, FlowScenario, OffloadOptions, SamplingDensity, ThresholdRule, Window,
};

fn zipf() -> CategoricalDistribution {
    CategoricalDistribution::zipf(32, 0.8).unwrap()
}

fn two_regime(w: f64) -> DriftPath {
    let a = zipf();
    let b = a.reversed();
    DriftPath::piecewise_linear(&[(0.0, &a), (0.5, &a), (0.5 + w, &b), (1.0, &b)], 1.0).unwrap()
}

fn analytic(path: &DriftPath) -> Experiment<'_> {
    Experiment { path, test_time: 0.0, evaluation: Evaluation::Analytic, seed: 0 }
}

#[test]
fn traces_respect_the_loop_invariants() {
    let fit = LearningCurveFit::analytic(&zipf(), 0.0);
    let full = Window::new(0.0, 1.0).unwrap();
    for w in [0.02, 0.2, 0.4] {
        let path = two_regime(w);
        for rule in [ThresholdRule::RetainedFraction, ThresholdRule::DeletedFraction] {
            let opts = OffloadOptions { threshold: rule, ..OffloadOptions::default() };
            let d = SamplingDensity::uniform(0.0, 1.0).unwrap();
            let trace = sequential_offload(&analytic(&path), &d, full, 2000, &fit, &opts).unwrap();
            assert!(!trace.steps.is_empty());
            for (i, s) in trace.steps.iter().enumerate() {
                assert_eq!(s.iteration, i);
                assert!(s.t_new <= s.t_prev);
                assert!(s.n_new <= s.n_prev);
                assert_eq!(s.n_deleted, s.n_prev - s.n_new);
                assert_eq!(s.accepted, s.gain_ratio > s.threshold);
                assert!(s.gain_ratio >= 0.0);
                // Only the last step may be a rejection.
                assert!(s.accepted || i + 1 == trace.steps.len());
            }
            for pair in trace.steps.windows(2) {
                assert_eq!(pair[1].t_prev, pair[0].t_new);
                assert_eq!(pair[1].n_prev, pair[0].n_new);
            }
            assert!(trace.final_window.1 <= 1.0);
        }
    }
}

#[test]
fn deleted_fraction_rule_is_stricter_for_small_cuts() {
    let fit = LearningCurveFit::analytic(&zipf(), 0.0);
    let path = two_regime(0.02);
    let d = SamplingDensity::uniform(0.0, 1.0).unwrap();
    let full = Window::new(0.0, 1.0).unwrap();
    let retained = sequential_offload(&analytic(&path), &d, full, 4096, &fit, &OffloadOptions::default()).unwrap();
    let first = &retained.steps[0];
    let deleted_threshold = first.n_prev as f64 / first.n_deleted as f64;
    let opts = OffloadOptions { threshold: ThresholdRule::DeletedFraction, ..OffloadOptions::default() };
    let deleted = sequential_offload(&analytic(&path), &d, full, 4096, &fit, &opts).unwrap();
    assert!((deleted.steps[0].threshold - deleted_threshold).abs() < 1e-12);
}

#[test]
fn stationary_data_is_never_offloaded() {
    let p = zipf();
    let path = DriftPath::constant(&p, 1.0).unwrap();
    let fit = LearningCurveFit::analytic(&p, 0.0);
    for d in [
        SamplingDensity::uniform(0.0, 1.0).unwrap(),
        SamplingDensity::flow(vec![0.0, 0.5, 1.0], vec![1.0, 5.0]).unwrap(),
    ] {
        let trace = sequential_offload(&analytic(&path), &d, Window::new(0.0, 1.0).unwrap(), 1000, &fit, &OffloadOptions::default())
            .unwrap();
        assert_eq!(trace.accepted_steps().count(), 0);
        assert_eq!(trace.final_size, 1000);
        let et = equivalent_time(&path, &d, Window::new(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(et.t_star, 0.0);
    }
}

#[test]
fn more_flow_accepts_at_least_as_much() {
    let p = zipf();
    let path = DriftPath::linear(&p, &p.reversed(), 1.0).unwrap();
    let fit = LearningCurveFit::analytic(&p, 0.0);
    let base = SamplingDensity::flow(vec![0.0, 0.25, 0.5, 0.75, 1.0], vec![400.0, 300.0, 200.0, 100.0]).unwrap();
    for alpha in [1.0, 2.0, 4.0, 8.0] {
        let scenario = FlowScenario::new(base.clone(), alpha, 1.0).unwrap();
        assert_eq!(scenario.sizes(), (250, (250.0 * alpha) as u64));
        let c = flow_scaling_analysis(&analytic(&path), &scenario, &fit, &OffloadOptions::default()).unwrap();
        assert!(c.accepted_subset, "alpha {alpha}");
        assert!(c.high_is_closer, "alpha {alpha}");
        assert!(c.high_equivalent_time <= c.low_equivalent_time + 1e-12);
    }
    assert!(FlowScenario::new(base.clone(), 0.5, 1.0).is_err());
    assert!(FlowScenario::new(SamplingDensity::uniform(0.0, 1.0).unwrap(), 2.0, 1.0).is_err());
}

#[test]
fn substitution_grows_with_size_under_drift() {
    let p = zipf();
    let path = DriftPath::linear(&p, &p.reversed(), 1.0).unwrap();
    let fit = LearningCurveFit::analytic(&p, 0.0);
    let e = analytic(&path);
    let values: Vec<f64> = [1u64, 10, 100, 1000, 10_000]
        .iter()
        .map(|&n| substitution(&e, 0.2, 0.6, n, &fit).unwrap())
        .collect();
    assert!(values.windows(2).all(|w| w[1] >= w[0]), "{values:?}");
    assert!(values.iter().all(|f| *f >= 1.0));
    assert_eq!(substitution(&e, 0.4, 0.4, 100, &fit).unwrap(), 1.0);
}

#[test]
fn accepted_steps_move_closer_and_grow_value() {
    let fit = LearningCurveFit::analytic(&zipf(), 0.0);
    let path = two_regime(0.02);
    let d = SamplingDensity::uniform(0.0, 1.0).unwrap();
    let trace = sequential_offload(&analytic(&path), &d, Window::new(0.0, 1.0).unwrap(), 4096, &fit, &OffloadOptions::default())
        .unwrap();
    assert!(trace.steps.len() <= 64);
    let accepted: Vec<_> = trace.accepted_steps().collect();
    // The truncated dataset is worth more than the full one.
    assert!(!accepted.is_empty());
    for s in &accepted {
        assert!(s.equiv_size_after.unwrap() > s.equiv_size_before.unwrap());
        assert!(s.t_new < s.t_prev);
    }
    for w in accepted.windows(2) {
        assert!(w[1].t_new < w[0].t_new);
    }
}

#[test]
fn data_at_time_zero_has_nothing_to_cut() {
    let p = zipf();
    let path = DriftPath::linear(&p, &p.reversed(), 1.0).unwrap();
    let fit = LearningCurveFit::analytic(&p, 0.0);
    let d = SamplingDensity::piecewise(vec![(0.0, 1.0), (1e-9, 0.0), (1.0, 0.0)]).unwrap();
    let trace = sequential_offload(&analytic(&path), &d, Window::new(0.0, 1.0).unwrap(), 100, &fit, &OffloadOptions::default())
        .unwrap();
    assert_eq!(trace.accepted_steps().count(), 0);
    assert_eq!(trace.steps.len(), 1);
}

#[test]
fn unit_multiplier_gives_identical_traces() {
    let p = zipf();
    let path = DriftPath::linear(&p, &p.reversed(), 1.0).unwrap();
    let fit = LearningCurveFit::analytic(&p, 0.0);
    let base = SamplingDensity::flow(vec![0.0, 0.5, 1.0], vec![800.0, 200.0]).unwrap();
    let e = Experiment { path: &path, test_time: 0.0, evaluation: Evaluation::monte_carlo_exact(4), seed: 3 };
    let c = flow_scaling_analysis(&e, &FlowScenario::new(base, 1.0, 1.0).unwrap(), &fit, &OffloadOptions::default()).unwrap();
    assert_eq!(c.low, c.high);
}
