use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("event {index}: rating {rating} outside [1, 5]")]
    RatingOutOfRange { index: usize, rating: i64 },

    #[error("split error: {0}")]
    Split(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("text encoder failed on document {doc}: {reason}")]
    Encoder { doc: String, reason: String },

    #[error("llm error: {0}")]
    Llm(String),

    #[error("could not parse llm reply: {reason}\n--- raw reply ---\n{raw}")]
    LlmParse { reason: String, raw: String },

    #[error("discovery aborted in round {round} at step '{step}': {source}")]
    Discovery {
        round: usize,
        step: String,
        #[source]
        source: Box<Error>,
    },

    #[error("confounder pool is empty; disable deconfounding or run more discovery rounds")]
    EmptyPool,

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("unknown ablation variant '{0}'")]
    UnknownVariant(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
