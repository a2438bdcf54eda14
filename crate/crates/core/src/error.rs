use thiserror::Error;

/// Errors raised by grid operators, oracles, the obstacle solver and the
/// free-boundary analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid too small: operator needs at least {needed} nodes per axis, got {got}")]
    GridTooSmall { needed: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("region selects no valid nodes")]
    EmptyRegion,

    #[error("sample point {point:?} lies outside the source domain")]
    OutsideDomain { point: [f64; 2] },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("direction is not a unit vector (norm {0})")]
    NonUnitDirection(f64),

    #[error("third-derivative norm vanishes; field is not a blow-up candidate")]
    VanishingThirdDerivative,

    #[error("gradient of the Laplacian carries no content on the region")]
    DegenerateDirection,

    #[error("boundary data mismatch: {0}")]
    BoundaryData(String),

    #[error("solver did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize, best: Box<crate::solver::SolveOutcome> },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("free boundary is empty")]
    EmptyBoundary,

    #[error("origin is not on the free boundary (nearest crossing at distance {0})")]
    OriginNotOnFreeBoundary(f64),

    #[error("points are not connected inside the mask")]
    Disconnected,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
