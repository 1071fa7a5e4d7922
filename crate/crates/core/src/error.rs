use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument is outside the domain of the operation.
    #[error("{name} = {value} is outside its domain: {constraint}")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// Caller violated a shape or ordering contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A schedule entry would need a quantile at or below the median.
    #[error("level too large: quantile argument {argument} at index {index} is not above 1/2")]
    LevelTooLarge { index: usize, argument: f64 },

    #[error("sample size too small: n = {n} leaves no degrees of freedom at index {index}")]
    SampleSizeTooSmall { n: usize, index: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("degenerate group {group}: all columns are zero")]
    DegenerateGroup { group: usize },

    #[error("schedule is not non-increasing at index {index}: {prev} < {next}")]
    NotMonotone { index: usize, prev: f64, next: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("replication {replication} (seed {seed:#018x}) failed: {source}")]
    Replication {
        replication: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// True for errors caused by bad user input (exit code 2), false for
    /// numerical failures (exit code 1).
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Domain { .. }
            | Error::Contract(_)
            | Error::LevelTooLarge { .. }
            | Error::NotMonotone { .. }
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_) => true,
            Error::SampleSizeTooSmall { .. }
            | Error::Singular(_)
            | Error::DegenerateGroup { .. } => false,
            Error::Replication { source, .. } => source.is_input_error(),
        }
    }
}

/// Checks `0 < p < 1`.
pub(crate) fn check_open_unit(name: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: p,
            constraint: "must lie strictly inside (0, 1)",
        })
    }
}

pub(crate) fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: v,
            constraint: "must be positive and finite",
        })
    }
}
