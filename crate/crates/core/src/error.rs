use std::path::PathBuf;

use thiserror::Error;

use crate::solver::SolveReport;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A model or grid parameter violates its constraint.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// A function was evaluated outside the set where it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A value slice lost concavity in the state variable beyond tolerance.
    #[error("slice is not concave: chord defect {defect:.3e} at x = {x:.6} exceeds {tol:.1e}")]
    NonConcave { defect: f64, x: f64, tol: f64 },

    /// Picard iteration did not reach the requested tolerance. The partial
    /// report is attached and must be treated as invalid.
    #[error("Picard iteration did not converge at t = {time}: residual {residual:.3e} after {iterations} iterations")]
    NotConverged {
        time: f64,
        residual: f64,
        iterations: usize,
        partial: Box<SolveReport>,
    },

    /// The frictionless root could not be bracketed in (0, 1).
    #[error("no sign change of v0_x on (0,1) at t = {time}; the Merton fraction must lie in (0,1)")]
    Bracket { time: f64 },

    /// A policy produced an inadmissible trade.
    #[error("inadmissible policy: {0}")]
    Inadmissible(String),

    #[error("config error in {path}: {msg}")]
    Config { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConcave { .. }
                | Error::NotConverged { .. }
                | Error::Bracket { .. }
                | Error::Inadmissible(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
