use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid index: {0}")]
    InvalidIndex(String),

    #[error("degree {requested} exceeds the table maximum {max}")]
    DegreeOutOfRange { requested: u32, max: u32 },

    #[error("J = {j} is outside the coupling range [{lo}, {hi}]")]
    CouplingRange { j: u32, lo: u32, hi: u32 },

    #[error("generator basis change left imaginary residue {0:e}")]
    ImaginaryResidue(f64),

    #[error("null space of the Sylvester system has dimension {found}, expected {expected}")]
    Nullity { found: usize, expected: usize },

    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("graph: {0}")]
    Graph(String),

    #[error("layer: {0}")]
    Layer(String),

    #[error("parameter `{name}`: {msg}")]
    Param { name: String, msg: String },

    #[error("training: {0}")]
    Training(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
