//! One error type for the whole crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("not a probability distribution: {0}")]
    NotADistribution(String),

    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("key kind mismatch: encoder produces {encoder}, retriever expects {retriever}")]
    KeyKindMismatch {
        encoder: &'static str,
        retriever: &'static str,
    },

    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown document id: {0}")]
    UnknownDoc(String),

    #[error("duplicate document id: {0}")]
    DuplicateDoc(String),

    #[error("unknown entity: {0}")]
    UnknownEntity(String),

    #[error("pattern binds no slot")]
    UnboundPattern,

    #[error("no entity related to {parent} via {relation} in the local graph")]
    NoRelatedEntity { parent: String, relation: String },

    #[error("question links no entities")]
    NoLinkedEntities,

    #[error("{tokens} tokens but {tags} tags")]
    MisalignedTags { tokens: usize, tags: usize },

    #[error("class specificity needs a class selector")]
    MissingClassSelector,

    #[error("model assigned zero probability to observed token {0:?}")]
    ZeroProbability(String),

    #[error("bad index file: {0}")]
    BadIndexFile(String),

    #[error("unknown pipeline: {0}")]
    UnknownPipeline(String),

    #[error("bad input: {0}")]
    BadInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
