use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid formula: {0}")]
    Formula(String),

    #[error("assignment has {have} values but the formula uses variable x{var}")]
    IncompleteAssignment { have: usize, var: usize },

    #[error("brute-force enumeration refused: {num_vars} variables exceeds cap {cap}")]
    EnumerationCap { num_vars: usize, cap: usize },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("graph has {nodes} nodes, above the cap of {cap} for {what}")]
    SizeCap { what: &'static str, nodes: usize, cap: usize },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {stage} (layer {layer})")]
    NonFinite { stage: &'static str, layer: usize },

    #[error("dataset format: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
