use std::path::PathBuf;

use chrono::NaiveDate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("no observations")]
    NoObservations,

    #[error("no overlapping dates")]
    NoOverlap,

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("rate path does not cover t = {t}")]
    Coverage { t: f64 },

    #[error("blow-up at t = {t}")]
    BlowUp { t: f64 },

    #[error("missing covariates for months: {}", fmt_months(.0))]
    MissingCovariates(Vec<NaiveDate>),

    #[error("too few blocks: {found} (need at least {required})")]
    TooFewBlocks { found: usize, required: usize },

    #[error("models not nested or misfit (deviance {deviance})")]
    NotNested { deviance: f64 },

    #[error("rate has no moderating effect (mu1 = {mu1})")]
    NoModeratingEffect { mu1: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::BlowUp { .. } | Error::Numerical(_))
    }
}

fn fmt_months(months: &[NaiveDate]) -> String {
    months
        .iter()
        .map(|d| d.format("%Y-%m").to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
