//! Timestamped datasets drawn from a drift path, the smoothed categorical
//! maximum-likelihood estimator, and its losses.

use std::io::Write;

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::density::SamplingDensity;
use crate::distribution::{
    expected_cross_entropy, CategoricalDistribution, ElementId, LossUnit, DEFAULT_DELTA,
};
use crate::error::{Error, Result};
use crate::numeric::stream_rng;
use crate::path::{DriftPath, PathKind};

/// Jeffreys pseudo-count.
pub const DEFAULT_SMOOTHING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub element: ElementId,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOrigin {
    pub density: SamplingDensity,
    pub seed: u64,
}

/// Multiset of `(element, sample time)` draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    draws: Vec<Draw>,
    dim: usize,
    origin: Option<DatasetOrigin>,
}

impl Dataset {
    pub fn from_draws(draws: Vec<Draw>, dim: usize) -> Result<Self> {
        if let Some(d) = draws.iter().find(|d| d.element.index() >= dim) {
            return Err(Error::InvalidArgument(format!(
                "element {} outside a {dim}-element set",
                d.element.0
            )));
        }
        Ok(Self {
            draws,
            dim,
            origin: None,
        })
    }

    pub fn draws(&self) -> &[Draw] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> Option<&DatasetOrigin> {
        self.origin.as_ref()
    }

    pub fn counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.dim];
        for d in &self.draws {
            c[d.element.index()] += 1;
        }
        c
    }

    /// CSV with header `element_id,sample_time`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["element_id", "sample_time"])?;
        for d in &self.draws {
            w.write_record([d.element.0.to_string(), d.time.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Alias table over a fixed distribution.
pub struct ElementSampler {
    alias: WeightedAliasIndex<f64>,
}

impl ElementSampler {
    pub fn new(p: &CategoricalDistribution) -> Self {
        let alias = WeightedAliasIndex::new(p.probs().to_vec()).expect("strictly positive weights");
        Self { alias }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ElementId {
        ElementId(self.alias.sample(rng) as u32)
    }

    /// Element counts of `n` independent draws.
    pub fn counts<R: Rng + ?Sized>(&self, n: u64, dim: usize, rng: &mut R) -> Vec<u64> {
        let mut c = vec![0u64; dim];
        for _ in 0..n {
            c[self.alias.sample(rng)] += 1;
        }
        c
    }
}

/// Draws `n` samples: each time `t_i ~ λ`, then `ω_i ~ P_{t_i}`.
///
/// Deterministic given `seed`. Linear and birth paths are sampled through
/// their mixture structure; random-walk paths are evaluated per draw.
pub fn sample_dataset(
    path: &DriftPath,
    density: &SamplingDensity,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    density.validate()?;
    let (lo, hi) = density.support();
    path.check_time(lo)?;
    path.check_time(hi)?;
    let mut rng = stream_rng(seed, &[0x6461_7461]);
    let mut draws = Vec::with_capacity(n);
    if let Some(t) = density.point_time() {
        let sampler = ElementSampler::new(&path.at(t)?);
        for _ in 0..n {
            draws.push(Draw { element: sampler.sample(&mut rng), time: t });
        }
    } else {
        let mixture = MixtureSampler::for_path(path)?;
        for _ in 0..n {
            let t = density.sample_time(&mut rng);
            let element = mixture.sample_at(path, t, &mut rng)?;
            draws.push(Draw { element, time: t });
        }
    }
    Ok(Dataset {
        draws,
        dim: path.dim(),
        origin: Some(DatasetOrigin {
            density: density.clone(),
            seed,
        }),
    })
}

enum MixtureSampler {
    Anchors { times: Vec<f64>, samplers: Vec<ElementSampler> },
    Birth { base: ElementSampler },
    Direct,
}

impl MixtureSampler {
    fn for_path(path: &DriftPath) -> Result<Self> {
        let spec = path.spec();
        Ok(match path.kind() {
            PathKind::Linear => {
                let mut times = Vec::new();
                let mut samplers = Vec::new();
                for a in &spec.anchors {
                    times.push(a.t);
                    samplers.push(ElementSampler::new(&path.at(a.t)?));
                }
                MixtureSampler::Anchors { times, samplers }
            }
            PathKind::Birth => {
                let base = CategoricalDistribution::smoothed(&spec.anchors[0].probs, spec.delta)?;
                MixtureSampler::Birth { base: ElementSampler::new(&base) }
            }
            PathKind::RandomWalk => MixtureSampler::Direct,
        })
    }

    fn sample_at<R: Rng + ?Sized>(&self, path: &DriftPath, t: f64, rng: &mut R) -> Result<ElementId> {
        match self {
            MixtureSampler::Anchors { times, samplers } => {
                let k = times.partition_point(|a| *a <= t);
                if k == 0 {
                    return Ok(samplers[0].sample(rng));
                }
                if k == times.len() {
                    return Ok(samplers[k - 1].sample(rng));
                }
                let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                let pick = if rng.random::<f64>() < w { k } else { k - 1 };
                Ok(samplers[pick].sample(rng))
            }
            MixtureSampler::Birth { base } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for b in &path.spec().births {
                    let frac = if t < b.t {
                        0.0
                    } else if b.ramp == 0.0 {
                        1.0
                    } else {
                        ((t - b.t) / b.ramp).min(1.0)
                    };
                    acc += b.mass * frac;
                    if u < acc {
                        return Ok(ElementId(b.element));
                    }
                }
                Ok(base.sample(rng))
            }
            MixtureSampler::Direct => {
                let p = path.at(t)?;
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, x) in p.probs().iter().enumerate() {
                    acc += x;
                    if u < acc {
                        return Ok(ElementId(i as u32));
                    }
                }
                Ok(ElementId(p.len() as u32 - 1))
            }
        }
    }
}

/// Smoothed categorical MLE: `probs ∝ count + pseudo_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalEstimator {
    probs: CategoricalDistribution,
    train_size: u64,
}

impl CategoricalEstimator {
    /// Treats `p` as the limit of infinitely many training draws.
    pub fn exact(p: CategoricalDistribution) -> Self {
        Self {
            probs: p,
            train_size: u64::MAX,
        }
    }

    pub fn distribution(&self) -> &CategoricalDistribution {
        &self.probs
    }

    pub fn train_size(&self) -> u64 {
        self.train_size
    }

    pub fn is_exact(&self) -> bool {
        self.train_size == u64::MAX
    }
}

/// Fits the estimator on a dataset. With `pseudo_count == 0` this is the
/// plain MLE; unseen elements then carry only the infinitesimal mass.
pub fn fit_mle(data: &Dataset, pseudo_count: f64) -> Result<CategoricalEstimator> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    fit_counts(&data.counts(), pseudo_count)
}

pub fn fit_counts(counts: &[u64], pseudo_count: f64) -> Result<CategoricalEstimator> {
    if !(pseudo_count.is_finite() && pseudo_count >= 0.0) {
        return Err(Error::InvalidArgument(format!("bad pseudo-count {pseudo_count}")));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let raw: Vec<f64> = counts.iter().map(|c| *c as f64 + pseudo_count).collect();
    Ok(CategoricalEstimator {
        probs: CategoricalDistribution::smoothed(&raw, DEFAULT_DELTA)?,
        train_size: n,
    })
}

/// Empirical cross-entropy `-(1/|test|) Σ ln m(ω_i)`.
pub fn empirical_loss(model: &CategoricalEstimator, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    empirical_loss_counts(model, &test.counts())
}

pub fn empirical_loss_counts(model: &CategoricalEstimator, counts: &[u64]) -> Result<f64> {
    if counts.len() != model.probs.len() {
        return Err(Error::DimensionMismatch {
            left: counts.len(),
            right: model.probs.len(),
        });
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let terms: Vec<f64> = counts
        .iter()
        .zip(model.probs.probs())
        .map(|(c, m)| -(*c as f64) * m.ln())
        .collect();
    Ok(crate::numeric::pairwise_sum(&terms) / n as f64)
}

/// Expected loss of the model on data from `p_test`.
pub fn exact_loss(model: &CategoricalEstimator, p_test: &CategoricalDistribution) -> Result<f64> {
    expected_cross_entropy(p_test, &model.probs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub replicate: usize,
    pub n: u64,
    pub loss_nats: f64,
}

/// CSV with header `replicate,n,loss_<unit>`.
pub fn write_losses_csv<W: Write>(records: &[LossRecord], unit: LossUnit, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replicate", "n", &format!("loss_{}", unit.name())])?;
    for r in records {
        w.write_record([
            r.replicate.to_string(),
            r.n.to_string(),
            unit.from_nats(r.loss_nats).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
