use std::path::PathBuf;

use thiserror::Error;
use warpgeo::GeoError;

use crate::expr::{EvalError, ParseError};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{context}: {source}")]
    Json { context: String, source: serde_json::Error },
    #[error("{context}: {source}")]
    Expression { context: String, source: ParseError },
    #[error("{context}: {source}")]
    Binding { context: String, source: EvalError },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Geo(e) => geo_exit_code(e),
            _ => EXIT_INPUT,
        }
    }
}

/// Hypothesis failures exit with 2, malformed requests with 3 and
/// numerical breakdowns with 4.
pub fn geo_exit_code(e: &GeoError) -> i32 {
    if e.is_hypothesis_failure() {
        return EXIT_HYPOTHESIS;
    }
    match e {
        GeoError::DomainError(_) | GeoError::DimensionMismatch { .. } | GeoError::DimensionError(_) | GeoError::KindMismatch(_) => {
            EXIT_INPUT
        }
        _ => EXIT_NUMERICAL,
    }
}

/// Combines exit codes of independent runs: input errors first, then
/// numerical failures, hypothesis failures and failed verdicts.
pub fn combine(codes: impl IntoIterator<Item = i32>) -> i32 {
    let rank = |c: i32| match c {
        EXIT_INPUT => 4,
        EXIT_NUMERICAL => 3,
        EXIT_HYPOTHESIS => 2,
        EXIT_FAIL => 1,
        _ => 0,
    };
    codes.into_iter().max_by_key(|&c| rank(c)).unwrap_or(EXIT_PASS)
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}
