use std::path::Path;

use driftval::curves::{Evaluation, InnerLoss, InversionOrder, LearningCurveFit};
use driftval::offload::{OffloadOptions, ThresholdRule, MAX_ITERATIONS, MIN_CUT_FRACTION};
use driftval::{DriftPath, DriftPathSpec, Error, Result, SamplingDensity};
use serde::{Deserialize, Serialize};

/// Everything a run needs besides the command line; reproducible from this
/// file and the seed alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub path: Option<DriftPathSpec>,
    /// Collection density of the dataset under study.
    pub density: Option<SamplingDensity>,
    /// Extra training specs for `equivalence`.
    pub trains: Vec<SamplingDensity>,
    pub test_time: f64,
    pub sizes: Vec<u64>,
    /// Sizes of the test-time curve used for fitting; defaults to `sizes`.
    pub fit_sizes: Vec<u64>,
    pub n: Option<u64>,
    pub replicates: Option<usize>,
    pub evaluation: Option<EvaluationKind>,
    pub test_size: Option<usize>,
    pub pseudo_count: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub units: Option<String>,
    pub inversion: InversionOrder,
    pub fit: Option<LearningCurveFit>,
    pub t1s: Vec<f64>,
    pub t2: Option<f64>,
    pub offload: OffloadConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationKind {
    MonteCarlo,
    MonteCarloExact,
    Analytic,
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffloadConfig {
    pub threshold: ThresholdRule,
    pub max_iterations: usize,
    pub min_cut_fraction: f64,
    /// When set, also compare against the flow scaled by this factor.
    pub multiplier: Option<f64>,
}

impl Default for OffloadConfig {
    fn default() -> Self {
        Self {
            threshold: ThresholdRule::default(),
            max_iterations: MAX_ITERATIONS,
            min_cut_fraction: MIN_CUT_FRACTION,
            multiplier: None,
        }
    }
}

pub const DEFAULT_SIZES: [u64; 6] = [128, 256, 512, 1024, 2048, 4096];
pub const DEFAULT_N: u64 = 1024;
pub const DEFAULT_REPLICATES: usize = 20;

impl RunConfig {
    pub fn load(file: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(file)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn drift_path(&self) -> Result<DriftPath> {
        let spec = self
            .path
            .clone()
            .ok_or_else(|| Error::InvalidArgument("config has no `path`".into()))?;
        DriftPath::from_spec(spec)
    }

    pub fn density(&self, path: &DriftPath) -> Result<SamplingDensity> {
        match &self.density {
            Some(d) => {
                d.validate()?;
                Ok(d.clone())
            }
            None => SamplingDensity::uniform(0.0, path.horizon()),
        }
    }

    pub fn sizes(&self) -> Vec<u64> {
        if self.sizes.is_empty() {
            DEFAULT_SIZES.to_vec()
        } else {
            self.sizes.clone()
        }
    }

    pub fn fit_sizes(&self) -> Vec<u64> {
        if self.fit_sizes.is_empty() {
            self.sizes()
        } else {
            self.fit_sizes.clone()
        }
    }

    pub fn n(&self) -> u64 {
        self.n.unwrap_or(DEFAULT_N)
    }

    pub fn evaluation(&self) -> Evaluation {
        let replicates = self.replicates.unwrap_or(DEFAULT_REPLICATES);
        let pseudo_count = self.pseudo_count.unwrap_or(driftval::sampling::DEFAULT_SMOOTHING);
        let sampled = InnerLoss::Sampled {
            test_size: self.test_size.unwrap_or(driftval::curves::DEFAULT_TEST_SIZE),
        };
        match self.evaluation.unwrap_or(EvaluationKind::MonteCarlo) {
            EvaluationKind::MonteCarlo => Evaluation::MonteCarlo {
                replicates,
                inner: sampled,
                pseudo_count,
            },
            EvaluationKind::MonteCarloExact => Evaluation::MonteCarlo {
                replicates,
                inner: InnerLoss::Exact,
                pseudo_count,
            },
            EvaluationKind::Analytic => Evaluation::Analytic,
            EvaluationKind::Limit => Evaluation::Limit,
        }
    }

    pub fn offload_options(&self) -> OffloadOptions {
        OffloadOptions {
            threshold: self.offload.threshold,
            max_iterations: self.offload.max_iterations,
            min_cut_fraction: self.offload.min_cut_fraction,
            order: self.inversion,
        }
    }
}
