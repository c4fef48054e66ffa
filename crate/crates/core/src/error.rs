use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("insufficient data: need {needed} {what}, got {got}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error(
        "calibration failed: gamma = {gamma} (slope {slope}, residual rms {residual_rms}, {points_used} points)"
    )]
    CalibrationFailed {
        gamma: f64,
        slope: f64,
        residual_rms: f64,
        points_used: usize,
    },

    #[error("no fringe: mean-voltage series is flat at {level}")]
    NoFringe { level: f64 },

    #[error("grid coverage: {0}")]
    Coverage(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("partial data: {} missing item(s), first: {}", missing.len(), missing.first().map(String::as_str).unwrap_or("-"))]
    PartialData { missing: Vec<String> },

    #[error("calibration failed in {skipped} of {total} cells")]
    CalibrationDominated { skipped: usize, total: usize },

    #[error("missing analysis artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
