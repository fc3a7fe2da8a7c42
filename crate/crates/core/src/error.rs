use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or simulation parameter violates its invariant.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// An argument lies outside the domain of the operation.
    #[error("{what} = {value} is outside {domain}")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    /// The scenario is not in the persistence regime (R0s <= 1).
    #[error("quantity requires R0s > 1, got R0s = {r0s}")]
    NotPersistent { r0s: f64 },

    /// Requires a strictly positive noise intensity.
    #[error("quantity is undefined for sigma = 0; use the zero-noise limit")]
    ZeroNoise,

    /// sigma_tilde needs alpha*c2*N > c1.
    #[error("no positive noise range: alpha*c2*N - c1 = {excess} <= 0")]
    NoNoiseRange { excess: f64 },

    /// Stationary mean formula has a non-positive denominator.
    #[error("stationary moments out of validity: denominator = {denominator}")]
    MomentsOutOfValidity { denominator: f64 },

    /// One or more ensemble members failed.
    #[error("{} of the ensemble paths failed; first: {}", .failures.len(), .failures[0].1)]
    Ensemble { failures: Vec<(usize, Box<Error>)> },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::InvalidParameter { .. } | Error::OutOfDomain { .. }
        )
    }
}
