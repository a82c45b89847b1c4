use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("training corpus has no bigrams")]
    EmptyCorpus,
    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("unknown provider {0:?}")]
    UnknownProvider(String),
    #[error("missing probability vector for provider {0}")]
    MissingProvider(String),
    #[error("tokenization mismatch for provider {provider} at index {index}")]
    Misaligned { provider: String, index: usize },
    #[error("provider {provider} not cached and unreachable: {message}")]
    Unreachable { provider: String, message: String },
    #[error("provider request failed with status {status}: {body}")]
    Permanent { status: u16, body: String },
    #[error("provider request failed after {attempts} attempts: {last}")]
    TransientExhausted { attempts: usize, last: String },
    #[error("malformed provider response: {0}")]
    BadResponse(String),

    #[error("empty vector")]
    EmptyVector,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },
    #[error("invalid search depth {0}")]
    InvalidDepth(usize),

    #[error("training data must contain both classes")]
    SingleClass,
    #[error("no usable features")]
    NoFeatures,
    #[error("every candidate feature produced non-finite values")]
    AllCandidatesNan,
    #[error("document is empty after tokenization")]
    EmptyDocument,
    #[error("artifact: {0}")]
    Artifact(String),

    #[error("experiment plan: {0}")]
    Plan(String),
    #[error("perturbation: {0}")]
    Perturbation(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
