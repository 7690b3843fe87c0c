use thiserror::Error;

#[derive(Debug, Error)]
pub enum TripError {
    #[error("node id {id} out of range for a graph with {n} nodes")]
    NodeOutOfRange { id: usize, n: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("zero or non-finite direction on edge ({0}, {1})")]
    ZeroDirection(usize, usize),
    #[error("edge ({i}, {j}) measured twice with directions {angle:.3e} rad apart")]
    InconsistentDuplicate { i: usize, j: usize, angle: f64 },
    #[error("degenerate triangle: side-ratio vector has zero norm")]
    DegenerateTriangle,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value in {stage} at iteration {iteration}")]
    NonFinite { stage: &'static str, iteration: usize },
    #[error("estimated edges span {} disconnected components (sizes {:?})", .0.len(), .0.iter().map(Vec::len).collect::<Vec<_>>())]
    Disconnected(Vec<Vec<usize>>),
    #[error("no usable triangles")]
    NoUsableTriangles,
    #[error("alignment failed: {0}")]
    Alignment(String),
    #[error("invalid scene configuration: {0}")]
    InvalidScene(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TripError> = std::result::Result<T, E>;
