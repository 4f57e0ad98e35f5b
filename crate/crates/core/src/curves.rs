//! Learning curves `G_t(n)`: Monte Carlo estimation, power-law fits,
//! inversion and equivalent sizes.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::SamplingDensity;
use crate::distribution::{
    entropy, estimation_spread, expected_cross_entropy, kl_divergence, CategoricalDistribution,
};
use crate::error::{Error, Result};
use crate::net::{net_distribution, Window};
use crate::numeric::{mean, pairwise_sum, serde_float, stream_rng, variance};
use crate::path::DriftPath;
use crate::sampling::{empirical_loss_counts, fit_counts, ElementSampler, DEFAULT_SMOOTHING};

pub const DEFAULT_TEST_SIZE: usize = 50_000;
pub const GAMMA_GRID: usize = 64;
/// The gamma grid spans gaps `min_loss * 10^-k` for `k` in `[0, 8]`.
const GAMMA_GRID_DECADES: f64 = 8.0;

/// How the loss of a fitted model on the test distribution is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerLoss {
    /// Closed-form cross-entropy against the test distribution.
    Exact,
    /// Empirical loss on a fresh test set of the given size.
    Sampled { test_size: usize },
}

impl Default for InnerLoss {
    fn default() -> Self {
        InnerLoss::Sampled { test_size: DEFAULT_TEST_SIZE }
    }
}

/// How expected losses are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evaluation {
    /// Replicated fits on sampled training sets.
    MonteCarlo {
        replicates: usize,
        #[serde(default)]
        inner: InnerLoss,
        #[serde(default = "default_pseudo")]
        pseudo_count: f64,
    },
    /// Second-order expansion `H + KL + V / (2n)` of the expected loss.
    Analytic,
    /// Infinite training set: the estimator is the training distribution.
    Limit,
}

fn default_pseudo() -> f64 {
    DEFAULT_SMOOTHING
}

impl Evaluation {
    pub fn monte_carlo(replicates: usize) -> Self {
        Evaluation::MonteCarlo {
            replicates,
            inner: InnerLoss::default(),
            pseudo_count: DEFAULT_SMOOTHING,
        }
    }

    pub fn monte_carlo_exact(replicates: usize) -> Self {
        Evaluation::MonteCarlo {
            replicates,
            inner: InnerLoss::Exact,
            pseudo_count: DEFAULT_SMOOTHING,
        }
    }

    pub fn replicates(&self) -> usize {
        match self {
            Evaluation::MonteCarlo { replicates, .. } => *replicates,
            _ => 1,
        }
    }
}

/// Path, test time, evaluation mode and master seed shared by a family of
/// learning-curve computations.
#[derive(Debug, Clone, Copy)]
pub struct Experiment<'a> {
    pub path: &'a DriftPath,
    pub test_time: f64,
    pub evaluation: Evaluation,
    pub seed: u64,
}

/// Stream roles keep numerator, reference and curve replicates independent.
pub(crate) mod role {
    pub const CURVE: u64 = 1;
    pub const EQUIVALENCE: u64 = 2;
    pub const REFERENCE: u64 = 3;
    pub const NUMERATOR: u64 = 4;
    pub const DENOMINATOR: u64 = 5;
    pub const OFFLOAD: u64 = 6;
    pub const TEST_SET: u64 = 0x7465_7374;
}

/// Distribution of one training draw under `train`.
pub fn train_distribution(path: &DriftPath, train: &SamplingDensity) -> Result<CategoricalDistribution> {
    match train.point_time() {
        Some(t) => path.at(t),
        None => {
            let (lo, hi) = train.support();
            net_distribution(path, train, Window::new(lo, hi)?)
        }
    }
}

/// Short label such as `t=0.5` or `uniform[0,1]`.
pub fn train_label(train: &SamplingDensity) -> String {
    match train.point_time() {
        Some(t) => format!("t={t}"),
        None => {
            let (lo, hi) = train.support();
            format!("{}[{lo},{hi}]", train.kind_name())
        }
    }
}

/// Per-replicate losses of a size-`n` training set drawn from `train`,
/// evaluated on `p_test`. Analytic and limit modes return one value.
///
/// Replicate `r` uses the stream `(stream..., r)` regardless of `n`, and its
/// training draws for a smaller size are a prefix of those for a larger one.
pub(crate) fn replicate_losses(
    train: &CategoricalDistribution,
    p_test: &CategoricalDistribution,
    sizes: &[u64],
    evaluation: Evaluation,
    seed: u64,
    stream: &[u64],
) -> Result<Vec<Vec<f64>>> {
    if train.len() != p_test.len() {
        return Err(Error::DimensionMismatch {
            left: train.len(),
            right: p_test.len(),
        });
    }
    match evaluation {
        Evaluation::Limit => {
            let loss = expected_cross_entropy(p_test, train)?;
            Ok(sizes.iter().map(|_| vec![loss]).collect())
        }
        Evaluation::Analytic => {
            let base = expected_cross_entropy(p_test, train)?;
            let spread = estimation_spread(p_test, train)?;
            Ok(sizes
                .iter()
                .map(|n| vec![base + spread / (2.0 * *n as f64)])
                .collect())
        }
        Evaluation::MonteCarlo {
            replicates,
            inner,
            pseudo_count,
        } => {
            let sampler = ElementSampler::new(train);
            let test_sampler = match inner {
                InnerLoss::Sampled { .. } => Some(ElementSampler::new(p_test)),
                InnerLoss::Exact => None,
            };
            let per_rep: Vec<Result<Vec<f64>>> = (0..replicates)
                .into_par_iter()
                .map(|r| {
                    let mut coords = stream.to_vec();
                    coords.push(r as u64);
                    let test_counts = match (inner, &test_sampler) {
                        (InnerLoss::Sampled { test_size }, Some(ts)) => {
                            let mut c = coords.clone();
                            c.push(role::TEST_SET);
                            let mut rng = stream_rng(seed, &c);
                            Some(ts.counts(test_size as u64, p_test.len(), &mut rng))
                        }
                        _ => None,
                    };
                    let mut rng = stream_rng(seed, &coords);
                    let mut counts = vec![0u64; train.len()];
                    let mut drawn = 0u64;
                    let mut out = Vec::with_capacity(sizes.len());
                    for &n in sizes {
                        for _ in drawn..n {
                            counts[sampler.sample(&mut rng).index()] += 1;
                        }
                        drawn = n;
                        let model = fit_counts(&counts, pseudo_count)?;
                        let loss = match &test_counts {
                            Some(tc) => empirical_loss_counts(&model, tc)?,
                            None => expected_cross_entropy(p_test, model.distribution())?,
                        };
                        out.push(loss);
                    }
                    Ok(out)
                })
                .collect();
            let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
            Ok((0..sizes.len())
                .map(|i| per_rep.iter().map(|r| r[i]).collect())
                .collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningCurvePoint {
    pub n: f64,
    pub mean_loss: f64,
    pub std_err: f64,
    pub replicates: usize,
}

impl LearningCurvePoint {
    pub fn new(n: f64, mean_loss: f64) -> Self {
        Self {
            n,
            mean_loss,
            std_err: 0.0,
            replicates: 1,
        }
    }

    pub fn from_losses(n: f64, losses: &[f64]) -> Self {
        let se = if losses.len() > 1 {
            (variance(losses) / losses.len() as f64).sqrt()
        } else {
            0.0
        };
        Self {
            n,
            mean_loss: mean(losses),
            std_err: se,
            replicates: losses.len(),
        }
    }
}

fn check_sizes(sizes: &[u64]) -> Result<()> {
    if sizes.is_empty() || sizes[0] == 0 {
        return Err(Error::InvalidArgument("sizes must be non-empty and positive".into()));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("sizes must be strictly increasing".into()));
    }
    Ok(())
}

/// Learning curve of data from `train` evaluated at the experiment's test time.
pub fn estimate_learning_curve(
    exp: &Experiment,
    train: &SamplingDensity,
    sizes: &[u64],
) -> Result<Vec<LearningCurvePoint>> {
    check_sizes(sizes)?;
    if let Evaluation::MonteCarlo { replicates, .. } = exp.evaluation {
        if replicates < 3 {
            return Err(Error::InvalidArgument("at least 3 replicates are required".into()));
        }
    }
    let q = train_distribution(exp.path, train)?;
    let p_test = exp.path.at(exp.test_time)?;
    let losses = replicate_losses(&q, &p_test, sizes, exp.evaluation, exp.seed, &[role::CURVE])?;
    Ok(sizes
        .iter()
        .zip(&losses)
        .map(|(n, l)| LearningCurvePoint::from_losses(*n as f64, l))
        .collect())
}

/// Power law `G(n) = gamma + alpha * n^-beta` fitted on `[n_min, n_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningCurveFit {
    pub test_time: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub r2: f64,
    pub n_min: f64,
    #[serde(with = "serde_float")]
    pub n_max: f64,
}

impl LearningCurveFit {
    /// Second-order curve of the smoothed estimator at its own time:
    /// `H(p) + (K - 1) / (2n)`. Inverting analytic losses through it gives
    /// back `n` exactly for same-time data.
    pub fn analytic(p: &CategoricalDistribution, test_time: f64) -> Self {
        Self {
            test_time,
            alpha: (p.len() as f64 - 1.0) / 2.0,
            beta: 1.0,
            gamma: entropy(p),
            r2: 1.0,
            n_min: 1.0,
            n_max: f64::INFINITY,
        }
    }

    pub fn with_test_time(mut self, t: f64) -> Self {
        self.test_time = t;
        self
    }

    pub fn eval(&self, n: f64) -> f64 {
        self.gamma + self.alpha * n.powf(-self.beta)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Profile {
    alpha: f64,
    beta: f64,
    gamma: f64,
    sse: f64,
}

fn sse(ns: &[f64], ls: &[f64], alpha: f64, beta: f64, gamma: f64) -> f64 {
    let r: Vec<f64> = ns
        .iter()
        .zip(ls)
        .map(|(n, l)| {
            let e = l - gamma - alpha * n.powf(-beta);
            e * e
        })
        .collect();
    pairwise_sum(&r)
}

/// Least-squares line through `(x, y)`: returns `(intercept, slope)`.
fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy = pairwise_sum(&x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect::<Vec<_>>());
    let sxx = pairwise_sum(&x.iter().map(|a| (a - mx) * (a - mx)).collect::<Vec<_>>());
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

fn profile(ns: &[f64], ls: &[f64], gamma: f64) -> Profile {
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let y: Vec<f64> = ls.iter().map(|l| (l - gamma).ln()).collect();
    let (a, b) = ols(&x, &y);
    let (alpha, beta) = (a.exp(), -b);
    let sse = if beta > 0.0 && alpha.is_finite() {
        sse(ns, ls, alpha, beta, gamma)
    } else {
        f64::INFINITY
    };
    Profile { alpha, beta, gamma, sse }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|i, j| a[*i][col].abs().total_cmp(&a[*j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[row].iter_mut().zip(pivot_row).skip(col) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Levenberg-Marquardt on the untransformed squared error.
fn polish(ns: &[f64], ls: &[f64], start: Profile, gamma_max: f64) -> Profile {
    let mut p = [start.alpha, start.beta, start.gamma];
    let mut cur = start.sse;
    let mut mu = 1e-3;
    for _ in 0..200 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (n, l) in ns.iter().zip(ls) {
            let pw = n.powf(-p[1]);
            let r = l - p[2] - p[0] * pw;
            let j = [pw, -p[0] * pw * n.ln(), 1.0];
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        while mu < 1e12 {
            let mut m = jtj;
            for (d, row) in m.iter_mut().enumerate() {
                row[d] += mu * jtj[d][d].max(1e-300);
            }
            let Some(step) = solve3(m, jtr) else {
                mu *= 10.0;
                continue;
            };
            let q = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            let ok = q[0] > 0.0 && q[1] > 0.0 && q[2] >= 0.0 && q[2] < gamma_max;
            let s = if ok { sse(ns, ls, q[0], q[1], q[2]) } else { f64::INFINITY };
            if s < cur {
                let gain = (cur - s) / cur.max(1e-300);
                p = q;
                cur = s;
                mu = (mu / 10.0).max(1e-12);
                improved = gain > 1e-14;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Profile {
        alpha: p[0],
        beta: p[1],
        gamma: p[2],
        sse: cur,
    }
}

fn r2_log(ns: &[f64], ls: &[f64], fit: &Profile) -> f64 {
    let y: Vec<f64> = ls.iter().map(|l| (l - fit.gamma).ln()).collect();
    let my = mean(&y);
    let tot = pairwise_sum(&y.iter().map(|v| (v - my) * (v - my)).collect::<Vec<_>>());
    let res = pairwise_sum(
        &ns.iter()
            .zip(&y)
            .map(|(n, v)| {
                let e = v - (fit.alpha.ln() - fit.beta * n.ln());
                e * e
            })
            .collect::<Vec<_>>(),
    );
    if tot > 0.0 {
        1.0 - res / tot
    } else {
        1.0
    }
}

/// Fits `gamma + alpha * n^-beta` by least squares on the mean losses.
///
/// Gamma is searched on a log-spaced grid of gaps below the smallest loss,
/// with `(alpha, beta)` from a log-linear regression at each candidate; the
/// best candidate is refined by golden-section search and a final joint
/// least-squares polish.
pub fn fit_power_law(points: &[LearningCurvePoint]) -> Result<LearningCurveFit> {
    let not_power = |m: &str| Err(Error::CurveNotPowerLaw(m.to_string()));
    if points.len() < 4 {
        return not_power("at least 4 points are required");
    }
    let mut pts = points.to_vec();
    if pts.iter().any(|p| !(p.n > 0.0 && p.n.is_finite() && p.mean_loss.is_finite() && p.mean_loss > 0.0)) {
        return not_power("sizes and losses must be positive and finite");
    }
    pts.sort_by(|a, b| a.n.total_cmp(&b.n));
    let ns: Vec<f64> = pts.iter().map(|p| p.n).collect();
    let ls: Vec<f64> = pts.iter().map(|p| p.mean_loss).collect();
    let (n_min, n_max) = (ns[0], ns[ns.len() - 1]);
    if n_max < 8.0 * n_min {
        return not_power("sizes must span at least a factor of 8");
    }
    let min_loss = ls.iter().copied().fold(f64::INFINITY, f64::min);
    let max_loss = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max_loss - min_loss <= 1e-12 * max_loss || ls[0] <= ls[ls.len() - 1] {
        return not_power("losses do not decrease with size");
    }
    let gamma_at = |u: f64| min_loss * (1.0 - 10f64.powf(-GAMMA_GRID_DECADES * u / (GAMMA_GRID - 1) as f64));
    let grid: Vec<Profile> = (0..GAMMA_GRID)
        .into_par_iter()
        .map(|k| profile(&ns, &ls, gamma_at(k as f64)))
        .collect();
    let best_k = (0..GAMMA_GRID)
        .min_by(|a, b| grid[*a].sse.total_cmp(&grid[*b].sse))
        .expect("non-empty grid");
    if !grid[best_k].sse.is_finite() {
        return not_power("no decreasing power law fits the points");
    }

    let (mut lo, mut hi) = (best_k.saturating_sub(1) as f64, (best_k + 1).min(GAMMA_GRID - 1) as f64);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let f = |u: f64| profile(&ns, &ls, gamma_at(u)).sse;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let refined = profile(&ns, &ls, gamma_at(0.5 * (lo + hi)));
    let start = if refined.sse <= grid[best_k].sse {
        refined
    } else {
        profile(&ns, &ls, grid[best_k].gamma)
    };
    let best = polish(&ns, &ls, start, min_loss);
    if !(best.alpha > 0.0 && best.beta > 0.0) {
        return not_power("fitted curve is not decreasing");
    }
    Ok(LearningCurveFit {
        test_time: 0.0,
        alpha: best.alpha,
        beta: best.beta,
        gamma: best.gamma,
        r2: r2_log(&ns, &ls, &best),
        n_min,
        n_max,
    })
}

/// `G^{-1}(loss) = ((loss - gamma) / alpha)^(-1 / beta)`.
pub fn invert_curve(fit: &LearningCurveFit, loss: f64) -> Result<f64> {
    if !loss.is_finite() {
        return Err(Error::InvalidArgument(format!("loss {loss} is not finite")));
    }
    if loss <= fit.gamma {
        return Err(Error::BeyondIrreducible {
            loss,
            gamma: fit.gamma,
        });
    }
    Ok(((loss - fit.gamma) / fit.alpha).powf(-1.0 / fit.beta))
}

/// Order of the outer expectation and the inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionOrder {
    /// Invert every replicate's loss, then average.
    #[default]
    PerReplicate,
    /// Invert the mean loss.
    OfMean,
}

/// Averaged equivalent size of replicate losses. Replicates at or below the
/// irreducible loss are dropped; returns `(size, mean loss, clamped fraction)`
/// with `size = None` when every replicate was dropped.
pub fn invert_losses(
    fit: &LearningCurveFit,
    losses: &[f64],
    order: InversionOrder,
) -> Result<(Option<f64>, f64, f64)> {
    if losses.is_empty() {
        return Err(Error::InvalidArgument("no replicate losses".into()));
    }
    let mean_loss = mean(losses);
    match order {
        InversionOrder::OfMean => match invert_curve(fit, mean_loss) {
            Ok(v) => Ok((Some(v), mean_loss, 0.0)),
            Err(Error::BeyondIrreducible { .. }) => Ok((None, mean_loss, 1.0)),
            Err(e) => Err(e),
        },
        InversionOrder::PerReplicate => {
            let mut kept = Vec::with_capacity(losses.len());
            for l in losses {
                match invert_curve(fit, *l) {
                    Ok(v) => kept.push(v),
                    Err(Error::BeyondIrreducible { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            let clamped = 1.0 - kept.len() as f64 / losses.len() as f64;
            let size = (!kept.is_empty()).then(|| mean(&kept));
            Ok((size, mean_loss, clamped))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub train_spec: String,
    pub test_time: f64,
    pub n: u64,
    pub measured_loss: f64,
    pub equivalent_size: f64,
    pub reference_equivalent_size: f64,
    #[serde(with = "serde_float")]
    pub effectiveness: f64,
    pub clamped_fraction: f64,
}

/// Equivalent size of a size-`n` dataset drawn from `train`, measured
/// against `fit` (the learning curve at the test time).
///
/// Effectiveness divides by the equivalent size of `n` draws taken at the
/// test time itself, computed on independent streams; in the limit mode the
/// reference is `n`.
pub fn equivalent_size(
    exp: &Experiment,
    train: &SamplingDensity,
    n: u64,
    fit: &LearningCurveFit,
    order: InversionOrder,
) -> Result<EquivalenceReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let p_test = exp.path.at(exp.test_time)?;
    let q = train_distribution(exp.path, train)?;
    let losses = replicate_losses(&q, &p_test, &[n], exp.evaluation, exp.seed, &[role::EQUIVALENCE])?;
    let (size, mean_loss, clamped) = invert_losses(fit, &losses[0], order)?;
    let size = size.ok_or(Error::BeyondIrreducible {
        loss: mean_loss,
        gamma: fit.gamma,
    })?;
    let reference = match exp.evaluation {
        Evaluation::Limit => n as f64,
        _ => {
            let ref_losses =
                replicate_losses(&p_test, &p_test, &[n], exp.evaluation, exp.seed, &[role::REFERENCE])?;
            invert_losses(fit, &ref_losses[0], order)?
                .0
                .ok_or(Error::ReferenceUndefined)?
        }
    };
    Ok(EquivalenceReport {
        train_spec: train_label(train),
        test_time: exp.test_time,
        n,
        measured_loss: mean_loss,
        equivalent_size: size,
        reference_equivalent_size: reference,
        effectiveness: size / reference,
        clamped_fraction: clamped,
    })
}

/// Learning-curve points as CSV `n,mean_loss_<unit>,std_err_<unit>,replicates`.
pub fn write_curve_csv<W: Write>(
    points: &[LearningCurvePoint],
    unit: crate::distribution::LossUnit,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let u = unit.name();
    w.write_record(["n".to_string(), format!("mean_loss_{u}"), format!("std_err_{u}"), "replicates".into()])?;
    for p in points {
        w.write_record([
            p.n.to_string(),
            unit.from_nats(p.mean_loss).to_string(),
            unit.from_nats(p.std_err).to_string(),
            p.replicates.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `train_spec,test_time,n,mean_loss_nats,equiv_size,effectiveness,clamped_fraction`.
pub fn write_equivalence_csv<W: Write>(reports: &[EquivalenceReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "train_spec",
        "test_time",
        "n",
        "mean_loss_nats",
        "equiv_size",
        "effectiveness",
        "clamped_fraction",
    ])?;
    for r in reports {
        w.write_record([
            r.train_spec.clone(),
            r.test_time.to_string(),
            r.n.to_string(),
            r.measured_loss.to_string(),
            r.equivalent_size.to_string(),
            r.effectiveness.to_string(),
            r.clamped_fraction.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `KL(P_test ‖ q)` where `q` is the training distribution of `train`.
pub fn staleness(exp: &Experiment, train: &SamplingDensity) -> Result<f64> {
    let q = train_distribution(exp.path, train)?;
    kl_divergence(&exp.path.at(exp.test_time)?, &q)
}
