//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("match {match_id} has fewer than two frames; velocities need consecutive snapshots")]
    SingleFrame { match_id: String },

    #[error("frame at t={time_s} in match {match_id} has no ball holder")]
    MissingHolder { match_id: String, time_s: f64 },

    #[error("state width mismatch: model expects {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("inputs contain a single class; need at least two")]
    SingleClass,

    #[error("probability out of range: {value}")]
    ProbabilityRange { value: f64 },

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("behavioral propensity is zero for a taken action (episode {episode}, step {step})")]
    ZeroPropensity { episode: usize, step: usize },

    #[error("next-possession value missing for a kept possession (episode {episode}, step {step})")]
    MissingNextValue { episode: usize, step: usize },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("pipeline stage {stage} ({name}) failed: {source}")]
    Stage {
        stage: usize,
        name: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }

    /// Stage index for process exit codes; 0 for errors outside the pipeline.
    pub fn stage_index(&self) -> usize {
        match self {
            Error::Stage { stage, .. } => *stage,
            _ => 0,
        }
    }
}
