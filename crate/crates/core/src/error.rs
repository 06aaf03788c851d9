use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid room model: {0}")]
    InvalidRoom(String),
    #[error("grid is empty: no lattice center lies inside the room")]
    EmptyGrid,
    #[error("point ({x}, {y}) is outside the room")]
    OutsideRoom { x: f64, y: f64 },
    #[error("no point at the wall margin found after {iterations} iterations")]
    MarginProjection { iterations: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("position is not a grid element center")]
    NotAGridCenter,
    #[error("only {visible} reflectors visible, {required} required")]
    InsufficientVisible { visible: usize, required: usize },
    #[error("empty cost matrix")]
    EmptyCostMatrix,
    #[error("cost matrix has more rows ({rows}) than columns ({cols})")]
    TooManyRows { rows: usize, cols: usize },
    #[error("archive is empty")]
    EmptyArchive,
    #[error("no feasible placement after {restarts} restarts")]
    NoFeasiblePlacement { restarts: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no feasible particle in the initial swarm")]
    InitializationFailed,
    #[error("path segment from ({0}, {1}) to ({2}, {3}) leaves the room")]
    PathLeavesRoom(f64, f64, f64, f64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
