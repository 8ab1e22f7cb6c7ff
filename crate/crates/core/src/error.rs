use thiserror::Error;

/// Errors raised by sheaf construction, solvers and the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph must have at least one vertex")]
    EmptyGraph,

    #[error("vertex {vertex} out of range (graph has {count} vertices)")]
    UnknownVertex { vertex: usize, count: usize },

    #[error("self-loop at vertex {0} (graphs are irreflexive)")]
    SelfLoop(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("no edge between {0} and {1}")]
    UnknownEdge(usize, usize),

    #[error("stalk dimension must be positive ({0})")]
    ZeroDimension(String),

    #[error("restriction map {vertex} <| ({a}, {b}) has shape {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    RestrictionShape {
        vertex: usize,
        a: usize,
        b: usize,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },

    #[error("edge ({0}, {1}) is missing a restriction map")]
    MissingRestriction(usize, usize),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("cochain degree mismatch: expected degree {expected}, got {actual}")]
    DegreeMismatch { expected: u8, actual: u8 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("agent communication graph is disconnected")]
    DisconnectedAgents,

    #[error("target {0} is not sensed by any agent")]
    UnsensedTarget(usize),

    #[error("harmonic extension is not unique: relative cohomology H^0(G, G_p) has dimension {dimension} (targets do not pin down all agent directions)")]
    Infeasible {
        dimension: usize,
        /// Obstruction directions, one flattened agent 0-cochain each.
        obstruction: Vec<Vec<f64>>,
    },

    #[error("control effectiveness is rank deficient (rank {rank} < {rows} rows); a full-row-rank input map is required")]
    RankDeficient { rank: usize, rows: usize },

    #[error("agent {agent} at t = {time}: {source}")]
    Agent {
        agent: usize,
        time: f64,
        source: Box<Error>,
    },

    #[error("missing measurement from neighbor {neighbor} at vertex {vertex}")]
    MissingMeasurement { vertex: usize, neighbor: usize },

    #[error("unexpected measurement from non-neighbor {neighbor} at vertex {vertex}")]
    UnexpectedMeasurement { vertex: usize, neighbor: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite state at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
