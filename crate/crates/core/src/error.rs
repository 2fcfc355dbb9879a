use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShotError {
    #[error("unknown shot `{name}`; valid shots: {valid}")]
    UnknownShot { name: String, valid: String },
    #[error("invalid taxonomy: {0}")]
    Taxonomy(String),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}rally `{rally_id}`: {message}", location(*.line))]
    Validation { line: Option<usize>, rally_id: String, message: String },
    #[error("{}{message}", location(*.line))]
    Dataset { line: Option<usize>, message: String },
    #[error("unknown player `{0}`")]
    UnknownPlayer(String),
    #[error(transparent)]
    Shot(#[from] ShotError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn location(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("responder and stimulator must differ (both `{0}`)")]
    SamePlayer(String),
    #[error("invalid reward configuration: {0}")]
    Rewards(String),
    #[error("invalid smoothing constant {0}; must be finite and >= 0")]
    Alpha(f64),
    #[error("model file: {0}")]
    Format(String),
    #[error("models are not mirrored: {0}")]
    Mismatch(String),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid seed prefix: {0}")]
    Seed(String),
    #[error("invalid simulator configuration: {0}")]
    Config(String),
    #[error("unknown opponent policy `{name}`; registered: {known}")]
    UnknownPolicy { name: String, known: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(String),
    #[error("config: {0}")]
    Invalid(String),
}
