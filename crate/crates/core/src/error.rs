use thiserror::Error;

/// Errors raised by the simulation, analysis and transport routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} out of range: {detail}")]
    Range { what: &'static str, detail: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate design: templates {first} and {second} are indistinguishable")]
    Degenerate { first: String, second: String },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("degenerate trace: {0}")]
    DegenerateTrace(String),

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("pixel ({ix}, {iy}): {source}")]
    Pixel {
        ix: usize,
        iy: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn range(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Range {
            what,
            detail: detail.into(),
        }
    }

    /// Innermost error, unwrapping pixel context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Pixel { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
