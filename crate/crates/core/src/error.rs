use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate cell id {0:?}")]
    DuplicateCell(String),

    #[error("unknown cell id {0:?}")]
    UnknownCell(String),

    #[error("self-loop on vertex {0:?}: a regular 1-cell has two distinct faces")]
    SelfLoop(String),

    #[error("repeated vertex {0:?} in a simplex")]
    RepeatedVertex(String),

    #[error("incidence {face:?} < {coface:?} does not drop exactly one dimension")]
    NotCodimOne { face: String, coface: String },

    #[error("incidence sign for ({face:?}, {coface:?}) must be +1 or -1")]
    BadSign { face: String, coface: String },

    #[error("cell set is not upward-closed: {member:?} is in the set but its coface {coface:?} is not")]
    NotUpwardClosed { member: String, coface: String },

    #[error("cell set is not a subcomplex: {member:?} is in the set but its face {face:?} is not")]
    NotSubcomplex { member: String, face: String },

    #[error("sheaves live over different base complexes")]
    BaseMismatch,

    #[error("matrix for {context} has shape {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    ShapeMismatch {
        context: String,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },

    #[error("missing restriction map for incident pair ({face:?}, {coface:?})")]
    MissingRestriction { face: String, coface: String },

    #[error("inner product on {0:?} is not symmetric positive-definite")]
    NotSpd(String),

    #[error("matrix is not symmetric: residual {0:.3e}")]
    NotSymmetric(f64),

    #[error("matrix for {context} is not orthogonal: residual {residual:.3e}")]
    NotOrthogonal { context: String, residual: f64 },

    #[error("scale for {0:?} must be positive")]
    NonPositiveScale(String),

    #[error("cell map is not valid: pair ({face:?}, {coface:?}) maps to ({image_face:?}, {image_coface:?}), which is neither equal nor sign-compatibly incident")]
    InvalidCellMap {
        face: String,
        coface: String,
        image_face: String,
        image_coface: String,
    },

    #[error("cell map is not dimension-preserving at {0:?}")]
    NotDimensionPreserving(String),

    #[error("cell map is not locally injective over {0:?}")]
    NotLocallyInjective(String),

    #[error("cell map is not a covering over {0:?}")]
    NotCovering(String),

    #[error("cell map fiber sizes over dimension {0} are not constant")]
    NonConstantFiber(usize),

    #[error("cochain degree {got} does not match expected degree {expected}")]
    DegreeMismatch { got: usize, expected: usize },

    #[error("block for cell {cell:?} has length {got}, expected {expected}")]
    BlockLength {
        cell: String,
        got: usize,
        expected: usize,
    },

    #[error("vertex {0:?} has stalk dimension > 1: Kron reduction to a sheaf is obstructed")]
    StalkObstruction(String),

    #[error("Schur complement is not realizable as a width-two factorization: residual {0:.3e}")]
    FactorizationResidual(f64),

    #[error("cochain lies in the kernel of the degree block diagonal; frustration undefined")]
    DegenerateQuotient,

    #[error("cochain is not harmonic away from the boundary: residual {0:.3e}")]
    NotHarmonic(f64),

    #[error("every threshold rounds the cochain to zero")]
    AllZeroRounding,

    #[error("timestep {dt} is unstable: explicit Euler requires dt < {limit}")]
    UnstableTimestep { dt: f64, limit: f64 },

    #[error("epsilon must lie in (0, 1), got {0}")]
    EpsilonOutOfRange(f64),

    #[error("{0} is not a cycle: boundary residual {1:.3e}")]
    NotCycle(String, f64),

    #[error("cycles are not homologous: projection residual {0:.3e}")]
    NotHomologous(f64),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("operation requires a graph (1-dimensional complex)")]
    NotGraph,

    #[error("spectra have different lengths: {0} vs {1}")]
    SpectrumLength(usize, usize),

    #[error("{0}")]
    Unmet(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for precondition failures that do not fit a structured variant.
    pub fn unmet(msg: impl Into<String>) -> Self {
        Error::Unmet(msg.into())
    }
}
