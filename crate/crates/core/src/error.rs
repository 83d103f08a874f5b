use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand extents disagree. `what` names the offending dimension.
    #[error("{op}: shape mismatch in {what}: {detail}")]
    Shape {
        op: &'static str,
        what: &'static str,
        detail: String,
    },

    #[error("{op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown architecture `{0}`")]
    UnknownArchitecture(String),

    #[error("weight `{0}` is not bound")]
    MissingWeight(String),

    #[error("weight `{name}` has shape {found:?}, expected {expected:?}")]
    WeightShape {
        name: String,
        expected: [usize; 4],
        found: [usize; 4],
    },

    #[error("weight `{0}` is not referenced by the graph")]
    UnreferencedWeight(String),

    #[error("duplicate weight `{0}`")]
    DuplicateWeight(String),

    #[error("weight store is frozen")]
    Frozen,

    /// Malformed file content. `offset` is the byte position where decoding failed.
    #[error("{kind} at byte {offset}: {detail}")]
    Format {
        kind: &'static str,
        offset: usize,
        detail: String,
    },

    #[error("superpixel label {0} does not exist")]
    UnknownLabel(usize),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, what: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(op: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn format(kind: &'static str, offset: usize, detail: impl Into<String>) -> Self {
        Error::Format {
            kind,
            offset,
            detail: detail.into(),
        }
    }
}
