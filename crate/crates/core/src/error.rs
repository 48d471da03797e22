use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the spin-orbit library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {what}: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("series did not converge: last retained term {last_term:e}")]
    NonConvergence { last_term: f64 },

    #[error("derivative requested at a kink (theta_dot/n = {ratio})")]
    SingularPoint { ratio: f64 },

    #[error("state theta_dot = {theta_dot} lies outside strip [{lo}, {hi}]")]
    OutsideStrip { theta_dot: f64, lo: f64, hi: f64 },

    #[error("integration failed at t = {t}: {reason} (theta = {theta}, theta_dot = {theta_dot})")]
    IntegrationFailure {
        t: f64,
        theta: f64,
        theta_dot: f64,
        reason: String,
    },

    #[error("fit error {error:e} exceeds bound {bound:e} at theta_dot = {theta_dot}")]
    FitBound {
        error: f64,
        bound: f64,
        theta_dot: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cache file {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
