use thiserror::Error;

/// Errors raised by the model and estimation code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} = {value} is outside {range}")]
    Domain {
        what: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error("rank deficient design; dropped columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("demeaning did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, range: &'static str) -> Self {
        Error::Domain { what, value, range }
    }

    /// True for failures of the numerical machinery rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Consistency(_) | Error::RankDeficient { .. } | Error::NonConvergence { .. } | Error::Estimation(_)
        )
    }
}
