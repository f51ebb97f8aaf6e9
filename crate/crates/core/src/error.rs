use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error("non-affine expression: {0}")]
    Nonlinear(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("polyhedron is empty")]
    EmptyPolyhedron,
    #[error("unknown label {0}")]
    UnknownLabel(u32),
    #[error("no eta entry for label {0}")]
    Coverage(u32),
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("distribution of {0} does not have finite support")]
    UnboundedSupport(String),
    #[error("malformed derivation: {0}")]
    MalformedDerivation(String),
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
