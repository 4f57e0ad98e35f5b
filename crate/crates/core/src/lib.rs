//! Value of data under distribution drift: drift paths, timestamped
//! datasets, learning curves, substitution ratios and sequential offloading.

pub mod chart;
pub mod curves;
pub mod density;
pub mod distribution;
pub mod error;
pub mod ingest;
pub mod net;
pub mod numeric;
pub mod offload;
pub mod path;
pub mod sampling;
pub mod substitution;

pub use curves::{
    equivalent_size, estimate_learning_curve, fit_power_law, invert_curve, EquivalenceReport,
    Evaluation, Experiment, InnerLoss, InversionOrder, LearningCurveFit, LearningCurvePoint,
};
pub use density::SamplingDensity;
pub use distribution::{
    entropy, estimation_spread, expected_cross_entropy, kl_divergence, CategoricalDistribution,
    ElementId, LossUnit,
};
pub use error::{Error, Result};
pub use ingest::{build_reports, ingest, LossTable, PeriodReport, Reports};
pub use net::{net_distribution, Window};
pub use offload::{
    flow_scaling_analysis, sequential_offload, FlowComparison, FlowScenario, OffloadOptions,
    OffloadStep, OffloadTrace, ThresholdRule,
};
pub use path::{DriftPath, DriftPathSpec, PathKind};
pub use sampling::{
    empirical_loss, fit_mle, sample_dataset, CategoricalEstimator, Dataset, Draw,
};
pub use substitution::{
    equivalent_time, substitution, substitution_curve, substitution_frontier,
    EquivalentTimeResult, SubstitutionCurve,
};
