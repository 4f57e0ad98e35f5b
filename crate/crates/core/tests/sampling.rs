use driftval::{
    empirical_loss, entropy, expected_cross_entropy, fit_mle, kl_divergence, sample_dataset, CategoricalDistribution,
    CategoricalEstimator, DriftPath, SamplingDensity,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn fixture() -> DriftPath {
    let a = CategoricalDistribution::zipf(16, 1.0).unwrap();
    DriftPath::linear(&a, &a.reversed(), 1.0).unwrap()
}

fn chi_square_p_value(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = n as f64 * p;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dof = (counts.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

#[test]
fn point_samples_follow_the_path() {
    let path = fixture();
    for t in [0.0, 0.4, 1.0] {
        let data = sample_dataset(&path, &SamplingDensity::point(t), 100_000, 3).unwrap();
        let p = chi_square_p_value(&data.counts(), path.at(t).unwrap().probs());
        assert!(p > 1e-3, "t={t}: p-value {p}");
    }
}

#[test]
fn window_samples_follow_the_mixture() {
    let path = fixture();
    let d = SamplingDensity::uniform(0.0, 1.0).unwrap();
    let data = sample_dataset(&path, &d, 100_000, 4).unwrap();
    // A linear path averaged over a uniform window sits at its midpoint.
    let p = chi_square_p_value(&data.counts(), path.at(0.5).unwrap().probs());
    assert!(p > 1e-3, "p-value {p}");
    assert!(data.draws().iter().all(|d| (0.0..=1.0).contains(&d.time)));
}

#[test]
fn mle_converges_at_clt_rate() {
    let path = fixture();
    let truth = path.at(0.0).unwrap();
    let n = 100_000;
    let data = sample_dataset(&path, &SamplingDensity::point(0.0), n, 5).unwrap();
    let est = fit_mle(&data, 0.5).unwrap();
    let worst = est
        .distribution()
        .probs()
        .iter()
        .zip(truth.probs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let largest = truth.probs()[0];
    let bound = 5.0 * (largest * (1.0 - largest) / n as f64).sqrt();
    assert!(worst < 0.01 && worst < bound, "max error {worst}, bound {bound}");
}

#[test]
fn empirical_loss_is_unbiased() {
    let path = fixture();
    let p0 = path.at(0.0).unwrap();
    let model = CategoricalEstimator::exact(path.at(0.7).unwrap());
    let losses: Vec<f64> = (0..200)
        .map(|seed| {
            let test = sample_dataset(&path, &SamplingDensity::point(0.0), 2000, seed).unwrap();
            empirical_loss(&model, &test).unwrap()
        })
        .collect();
    let m = losses.iter().sum::<f64>() / losses.len() as f64;
    let var = losses.iter().map(|l| (l - m).powi(2)).sum::<f64>() / (losses.len() - 1) as f64;
    let se = (var / losses.len() as f64).sqrt();
    let want = entropy(&p0) + kl_divergence(&p0, model.distribution()).unwrap();
    assert!((m - want).abs() < 4.0 * se, "mean {m}, expected {want}, se {se}");
    assert!((want - expected_cross_entropy(&p0, model.distribution()).unwrap()).abs() < 1e-12);
}

#[test]
fn same_seed_same_dataset() {
    let path = fixture();
    let d = SamplingDensity::flow(vec![0.0, 0.5, 1.0], vec![1.0, 3.0]).unwrap();
    let a = sample_dataset(&path, &d, 500, 9).unwrap();
    let b = sample_dataset(&path, &d, 500, 9).unwrap();
    let c = sample_dataset(&path, &d, 500, 10).unwrap();
    assert_eq!(a.draws(), b.draws());
    assert_ne!(a.draws(), c.draws());
}

#[test]
fn sampling_outside_the_horizon_fails() {
    let path = fixture();
    assert!(sample_dataset(&path, &SamplingDensity::point(1.5), 10, 0).is_err());
    assert!(sample_dataset(&path, &SamplingDensity::point(0.5), 0, 0).is_err());
}
