use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is disconnected: vertex {unreachable} is unreachable from vertex {source_vertex}")]
    Disconnected { source_vertex: usize, unreachable: usize },

    #[error("level {0} is empty")]
    EmptyLevel(usize),

    #[error("predecessor of vertex {vertex} (level {level}) is not in level {}", level - 1)]
    BadPredecessor { vertex: usize, level: usize },

    #[error(
        "epsilon {epsilon} is inadmissible for delta {delta}: exp(epsilon*delta)-1 exceeds sqrt(2)-1; \
         the maximal admissible epsilon is ln(sqrt 2)/delta = {max_epsilon}"
    )]
    InadmissibleEpsilon { epsilon: f64, delta: f64, max_epsilon: f64 },

    #[error("sphere of radius {0} around the root is empty")]
    EmptySphere(u32),

    #[error("vertex {vertex} is not on the sphere of radius {radius}")]
    NotOnSphere { vertex: usize, radius: u32 },

    #[error("alpha {alpha} exceeds beta {beta}")]
    ScaleOrder { alpha: f64, beta: f64 },

    #[error("degenerate scale grid: {0}")]
    DegenerateGrid(String),

    #[error("seed points {a} and {b} are at distance {distance}, not more than r = {r}")]
    SeedNotSeparated { a: usize, b: usize, distance: f64, r: f64 },

    #[error(
        "center {center} needs more than {limit} colors; conflicting centers: {conflicts:?} \
         (kappa is probably underestimated)"
    )]
    ColorOverflow {
        center: usize,
        limit: usize,
        conflicts: Vec<usize>,
    },

    #[error("no net point within {radius} of cell {cell} (nearest at {nearest})")]
    NoTarget { cell: usize, radius: f64, nearest: f64 },

    #[error("cover leaves cell {0} uncovered")]
    CoverIncomplete(usize),

    #[error("no sphere vertex survives outside the separator")]
    NoSphereVertices,

    #[error("parse error at line {line}, byte offset {offset}: {message}")]
    Parse {
        line: usize,
        offset: usize,
        message: String,
    },

    #[error("unsupported {kind} version {found} (this build reads version {expected})")]
    UnsupportedVersion {
        kind: &'static str,
        found: u32,
        expected: u32,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
