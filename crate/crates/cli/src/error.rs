use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const FIT: i32 = 3;
    pub const CALIBRATION: i32 = 4;
    pub const CONFIG: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] delta_core::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn parse(path: &Path, line: Option<usize>, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use delta_core::Error as E;
        match self {
            CliError::Parse { .. } => exit::PARSE,
            CliError::Config(_) => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
            CliError::Core(e) => match e.root() {
                E::InsufficientData { .. } => exit::PARSE,
                E::Calibration(_) => exit::CALIBRATION,
                E::Config(_) | E::Range { .. } => exit::CONFIG,
                E::Domain(_)
                | E::Degenerate { .. }
                | E::RankDeficient(_)
                | E::Fit(_)
                | E::DegenerateTrace(_)
                | E::Pixel { .. } => exit::FIT,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        use delta_core::Error as E;
        match self {
            CliError::Parse { .. } => "parse",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Core(e) => match e.root() {
                E::Range { .. } => "range",
                E::Domain(_) => "domain",
                E::Config(_) => "config",
                E::Degenerate { .. } => "degenerate",
                E::RankDeficient(_) => "rank_deficient",
                E::Fit(_) => "fit",
                E::Calibration(_) => "calibration",
                E::DegenerateTrace(_) => "degenerate_trace",
                E::InsufficientData { .. } => "insufficient_data",
                E::Pixel { .. } => "pixel",
            },
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let (path, line) = match self {
            CliError::Parse { path, line, .. } => (Some(path.display().to_string()), *line),
            CliError::Io { path, .. } => (Some(path.display().to_string()), None),
            _ => (None, None),
        };
        ErrorRecord {
            kind: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
            path,
            line,
            tool_version: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// Structured failure written as `error.json` next to the outputs.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
    pub path: Option<String>,
    pub line: Option<usize>,
    pub tool_version: &'static str,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_per_class() {
        let p = CliError::parse(Path::new("a.csv"), Some(3), "bad");
        assert_eq!(p.exit_code(), exit::PARSE);
        assert_eq!(p.to_string(), "a.csv:3: bad");
        assert_eq!(CliError::Config("x".into()).exit_code(), exit::CONFIG);
        let fit: CliError = delta_core::Error::Fit("no".into()).into();
        assert_eq!(fit.exit_code(), exit::FIT);
        let cal: CliError = delta_core::Error::Calibration("no".into()).into();
        assert_eq!(cal.exit_code(), exit::CALIBRATION);
        let short: CliError = delta_core::Error::InsufficientData { needed: 5, got: 3 }.into();
        assert_eq!(short.exit_code(), exit::PARSE);
        assert_eq!(short.kind(), "insufficient_data");
    }
}
