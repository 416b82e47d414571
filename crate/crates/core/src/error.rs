use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("unexpected format tag {found:?}, expected {expected:?}")]
    FormatTag { expected: &'static str, found: String },
    #[error("expected {expected} per-vertex values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{free} free vertices exceed the enumeration cap of {cap}")]
    TooLarge { free: usize, cap: usize },
    #[error("configuration disagrees with the boundary condition at vertex {0}")]
    BoundaryConflict(usize),
    #[error("vertex {0} is fixed by the conditioning")]
    VertexFixed(usize),
    #[error("no certified decay rate: M(Δ, h0, β)·Δ² = {0} is not below 1")]
    NoCertifiedRate(f64),
    #[error("self-avoiding walk tree exceeded the node budget of {0}")]
    TreeTooLarge(usize),
    #[error("certified marginal error {error} at vertex {vertex} is at least 1/4")]
    StepErrorTooLarge { vertex: usize, error: f64 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
