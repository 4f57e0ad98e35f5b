use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right} elements")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid drift path: {0}")]
    InvalidPath(String),

    #[error("invalid sampling density: {0}")]
    InvalidDensity(String),

    #[error("density mass on window [{lo}, {hi}] is {mass}, expected 1")]
    DensityNotNormalized { lo: f64, hi: f64, mass: f64 },

    #[error("time {t} outside path horizon [0, {horizon}]")]
    OutsideHorizon { t: f64, horizon: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("curve not in power-law region: {0}")]
    CurveNotPowerLaw(String),

    #[error("loss {loss} is beyond irreducible loss {gamma}")]
    BeyondIrreducible { loss: f64, gamma: f64 },

    #[error("reference equivalence undefined: every replicate was clamped")]
    ReferenceUndefined,

    #[error("no sign change for equivalent time on [0, {t}] (target KL {target})")]
    NoSignChange { t: f64, target: f64 },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("unknown loss unit `{0}`")]
    UnknownUnit(String),

    #[error("missing same-period learning curve rows for period(s): {}", .0.join(", "))]
    MissingDiagonal(Vec<String>),

    #[error("malformed table: {0}")]
    MalformedTable(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidDistribution(_)
                | Error::InvalidPath(_)
                | Error::InvalidDensity(_)
                | Error::DensityNotNormalized { .. }
                | Error::OutsideHorizon { .. }
                | Error::EmptyDataset
                | Error::InvalidArgument(_)
                | Error::MissingColumn(_)
                | Error::UnknownUnit(_)
                | Error::MissingDiagonal(_)
                | Error::MalformedTable(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
