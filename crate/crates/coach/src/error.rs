use rally_core::{DataError, ModelError, ShotError, SimError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown dataset `{name}`; loaded: {known}")]
    UnknownDataset { name: String, known: String },
    #[error("dataset `{name}` changed since the session was created (version {expected}, now {found})")]
    DatasetMismatch { name: String, expected: String, found: String },
    #[error("unknown player `{0}`")]
    UnknownPlayer(String),
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("illegal shot: {0}")]
    IllegalShot(String),
    #[error("no rally in progress")]
    NoRally,
    #[error("outcome rejected: {0}")]
    BadOutcome(String),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error(transparent)]
    Shot(#[from] ShotError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("session log: {0}")]
    Log(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SessionError {
    /// Stable machine-readable code for API clients.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownSession(_) => "unknown_session",
            SessionError::UnknownDataset { .. } => "unknown_dataset",
            SessionError::DatasetMismatch { .. } => "dataset_mismatch",
            SessionError::UnknownPlayer(_) | SessionError::Data(DataError::UnknownPlayer(_)) => "unknown_player",
            SessionError::InvalidConfig(_) => "invalid_config",
            SessionError::IllegalShot(_) => "illegal_shot",
            SessionError::NoRally => "no_rally",
            SessionError::BadOutcome(_) => "bad_outcome",
            SessionError::NothingToUndo => "nothing_to_undo",
            SessionError::Shot(_) => "unknown_shot",
            SessionError::Data(_) | SessionError::Model(_) => "invalid_data",
            SessionError::Sim(_) => "simulation_error",
            SessionError::Log(_) | SessionError::Io { .. } => "storage_error",
        }
    }
}
