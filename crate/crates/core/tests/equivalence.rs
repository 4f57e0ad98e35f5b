#![allow(clippy::approx_constant)]

use driftval::curves::{invert_losses, InversionOrder, LearningCurveFit, LearningCurvePoint};
use driftval::numeric::median;
use driftval::{
    entropy, equivalent_size, estimate_learning_curve, fit_power_law, invert_curve, kl_divergence,
    CategoricalDistribution, DriftPath, Error, Evaluation, Experiment, SamplingDensity,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn fixture() -> DriftPath {
    let a = CategoricalDistribution::zipf(16, 0.8).unwrap();
    DriftPath::linear(&a, &a.reversed(), 1.0).unwrap()
}

fn exp(path: &DriftPath, evaluation: Evaluation, seed: u64) -> Experiment<'_> {
    Experiment { path, test_time: 0.0, evaluation, seed }
}

fn manual_fit(alpha: f64, beta: f64, gamma: f64) -> LearningCurveFit {
    LearningCurveFit { test_time: 0.0, alpha, beta, gamma, r2: 1.0, n_min: 1.0, n_max: 1e9 }
}

#[test]
fn noisy_curves_recover_the_exponent() {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.005).unwrap();
        let points: Vec<LearningCurvePoint> = (0..=14)
            .map(|k| {
                let n = 2f64.powi(k);
                LearningCurvePoint::new(n, 0.6931 + n.powf(-0.5) + noise.sample(&mut rng))
            })
            .collect();
        let fit = fit_power_law(&points).unwrap();
        assert!((fit.beta - 0.5).abs() <= 0.05, "seed {seed}: beta {}", fit.beta);
    }
}

#[test]
fn simulated_loss_falls_with_size_toward_entropy() {
    let p = CategoricalDistribution::zipf(16, 0.8).unwrap();
    let path = DriftPath::constant(&p, 1.0).unwrap();
    let sizes: Vec<u64> = (7..=17).map(|k| 1u64 << k).collect();
    let mut per_size = vec![Vec::new(); sizes.len()];
    for seed in 0..9 {
        let e = exp(&path, Evaluation::monte_carlo_exact(5), seed);
        let points = estimate_learning_curve(&e, &SamplingDensity::point(0.0), &sizes).unwrap();
        for (acc, pt) in per_size.iter_mut().zip(points) {
            acc.push(pt.mean_loss);
        }
    }
    let medians: Vec<f64> = per_size.iter().map(|v| median(v)).collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");

    let e = exp(&path, Evaluation::monte_carlo_exact(50), 1);
    let last = estimate_learning_curve(&e, &SamplingDensity::point(0.0), &[1 << 20]).unwrap()[0];
    let excess = last.mean_loss - entropy(&p);
    // The residual (K-1)/(2n) term is far below two standard errors of noise.
    assert!(excess.abs() <= 2.0 * last.std_err + 15.0 / (1u64 << 21) as f64, "excess {excess}, se {}", last.std_err);
}

#[test]
fn exact_estimators_score_cross_entropy() {
    let path = fixture();
    let p0 = path.at(0.0).unwrap();
    let e = exp(&path, Evaluation::Limit, 0);
    for s in [0.3, 1.0] {
        let pt = estimate_learning_curve(&e, &SamplingDensity::point(s), &[10, 1000]).unwrap();
        let want = entropy(&p0) + kl_divergence(&p0, &path.at(s).unwrap()).unwrap();
        assert!(pt.iter().all(|x| (x.mean_loss - want).abs() < 1e-12));
    }
}

#[test]
fn halved_effectiveness_halves_the_size() {
    let fit = manual_fit(10.0, 0.5, 2.0);
    assert!((invert_curve(&fit, fit.eval(50.0)).unwrap() / 100.0 - 0.5).abs() < 1e-12);
    assert!((invert_curve(&fit, fit.eval(40e6)).unwrap() / 50e6 - 0.8).abs() < 1e-9);
}

#[test]
fn limit_mode_reaches_the_divergence_bound() {
    let path = fixture();
    let p0 = path.at(0.0).unwrap();
    let fit = LearningCurveFit::analytic(&p0, 0.0);
    for s in [0.2, 0.6, 1.0] {
        let r = equivalent_size(&exp(&path, Evaluation::Limit, 0), &SamplingDensity::point(s), 1000, &fit, InversionOrder::PerReplicate)
            .unwrap();
        let kl = kl_divergence(&p0, &path.at(s).unwrap()).unwrap();
        let bound = (p0.len() as f64 - 1.0) / 2.0 / kl;
        assert!((r.equivalent_size - bound).abs() < 1e-9 * bound);
        assert_eq!(r.reference_equivalent_size, 1000.0);
    }
}

#[test]
fn analytic_same_time_effectiveness_is_one() {
    let path = fixture();
    let fit = LearningCurveFit::analytic(&path.at(0.0).unwrap(), 0.0);
    for n in [10, 1000, 100_000] {
        let r = equivalent_size(&exp(&path, Evaluation::Analytic, 0), &SamplingDensity::point(0.0), n, &fit, InversionOrder::PerReplicate)
            .unwrap();
        assert!((r.effectiveness - 1.0).abs() < 1e-9);
        assert!((r.equivalent_size - n as f64).abs() < 1e-6 * n as f64);
    }
}

#[test]
fn staler_data_is_worth_less() {
    let path = fixture();
    let fit = LearningCurveFit::analytic(&path.at(0.0).unwrap(), 0.0);
    let e = exp(&path, Evaluation::Analytic, 0);
    let values: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&s| equivalent_size(&e, &SamplingDensity::point(s), 4096, &fit, InversionOrder::PerReplicate).unwrap().effectiveness)
        .collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
}

#[test]
fn losses_below_gamma_are_clamped() {
    let fit = manual_fit(1.0, 1.0, 2.0);
    assert!(matches!(invert_curve(&fit, 2.0), Err(Error::BeyondIrreducible { .. })));
    let (size, _, clamped) = invert_losses(&fit, &[1.9, 2.5, 3.0], InversionOrder::PerReplicate).unwrap();
    assert!((clamped - 1.0 / 3.0).abs() < 1e-12);
    assert!((size.unwrap() - 0.5 * (2.0 + 1.0)).abs() < 1e-12);
    let (size, _, clamped) = invert_losses(&fit, &[1.0, 1.5], InversionOrder::PerReplicate).unwrap();
    assert_eq!((size, clamped), (None, 1.0));
    let (size, mean, _) = invert_losses(&fit, &[2.5, 3.5], InversionOrder::OfMean).unwrap();
    assert_eq!(mean, 3.0);
    assert!((size.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn entropy_is_the_irreducible_loss() {
    let p = CategoricalDistribution::zipf(16, 0.8).unwrap();
    let fit = LearningCurveFit::analytic(&p, 0.0);
    assert_eq!(fit.gamma, entropy(&p));
    assert_eq!(fit.alpha, 7.5);
    assert_eq!(fit.beta, 1.0);
}

#[test]
fn invalid_experiments_are_rejected() {
    let path = fixture();
    let d = SamplingDensity::point(0.0);
    let few = exp(&path, Evaluation::monte_carlo_exact(2), 0);
    assert!(estimate_learning_curve(&few, &d, &[10, 20]).is_err());
    let ok = exp(&path, Evaluation::monte_carlo_exact(3), 0);
    assert!(estimate_learning_curve(&ok, &d, &[20, 10]).is_err());
    let flat: Vec<_> = (0..4).map(|k| LearningCurvePoint::new(100.0 * 4f64.powi(k), 1.0)).collect();
    assert!(matches!(fit_power_law(&flat), Err(Error::CurveNotPowerLaw(_))));
    let narrow: Vec<_> = (0..4).map(|k| LearningCurvePoint::new(100.0 + k as f64, 2.0 - 0.1 * k as f64)).collect();
    assert!(matches!(fit_power_law(&narrow), Err(Error::CurveNotPowerLaw(_))));
}
