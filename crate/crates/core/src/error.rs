use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid log-intensity: {0}")]
    InvalidLogIntensity(f64),

    #[error("invalid probability: {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("invalid precision: k[{index}] = {value}")]
    InvalidPrecision { index: usize, value: f64 },

    #[error("degenerate precision: k[{index}] = {value}")]
    DegeneratePrecision { index: usize, value: f64 },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("series too short: {len} observations, need at least {required}")]
    SeriesTooShort { len: usize, required: usize },

    #[error("row {row}: {message}")]
    DataRow { row: usize, message: String },

    #[error("missing weeks: {}", .0.join(", "))]
    MissingWeeks(Vec<String>),

    #[error("numerical failure in {block} at iteration {iteration}: {detail}")]
    Numerical {
        block: &'static str,
        iteration: usize,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the sampler state rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical { .. } | Error::DegeneratePrecision { .. }
        )
    }
}
