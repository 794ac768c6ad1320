use thiserror::Error;

use crate::geometry::SwarmConfig;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("agents {i} and {j} coincide (distance {distance:e})")]
    CoincidentAgents { i: usize, j: usize, distance: f64 },

    #[error("integration diverged at step {step} (t = {time})")]
    Diverged {
        step: usize,
        time: f64,
        /// Last finite configuration before the non-finite step.
        snapshot: Box<SwarmConfig>,
    },

    #[error("link {link} between agents {i} and {j} has zero length")]
    SingularLink { link: usize, i: usize, j: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("lattice generation failed after {attempts} attempts")]
    Generation { attempts: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
