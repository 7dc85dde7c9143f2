use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("array length mismatch: {what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("system must contain at least one atom")]
    EmptySystem,

    #[error("non-contiguous batch codes at atom {index}: {previous} followed by {found}")]
    NonContiguousBatch {
        index: usize,
        previous: usize,
        found: usize,
    },

    #[error("non-finite position for atom {0}")]
    NonFinitePosition(usize),

    #[error("malformed box: {0}")]
    MalformedBox(String),

    #[error("box not reduced: {0}")]
    BoxNotReduced(String),

    #[error("invalid neighbor spec: {0}")]
    InvalidNeighborSpec(String),

    #[error("neighbor list overflow: {required} pairs found but capacity is {capacity}")]
    Overflow { required: usize, capacity: usize },

    #[error("cutoff {cutoff} exceeds half of the minimum perpendicular box width {half_width}")]
    CutoffTooLarge { cutoff: f64, half_width: f64 },

    #[error("zero-distance pair ({0}, {1}) has no defined direction")]
    SingularPair(usize, usize),

    #[error("cutoff mismatch: potential uses [{expected_lower}, {expected_upper}], neighbor list was built with [{found_lower}, {found_upper}]")]
    CutoffMismatch {
        expected_lower: f64,
        expected_upper: f64,
        found_lower: f64,
        found_upper: f64,
    },

    #[error("empty potential: neither a network nor any prior term is present")]
    EmptyPotential,

    #[error("missing reference for element {0}")]
    MissingElement(u32),

    #[error("missing charges: the Coulomb term requires per-atom partial charges")]
    MissingCharges,

    #[error("invalid atomic number {0}")]
    InvalidAtomicNumber(u32),

    #[error("invalid prior parameter: {0}")]
    InvalidPrior(String),

    #[error("invalid scan grid: {0}")]
    InvalidGrid(String),

    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),

    #[error("species {species} is outside the embedding table of size {max_z}")]
    SpeciesOutOfRange { species: u32, max_z: usize },

    #[error("stale activation cache: system or parameters changed since the forward pass")]
    StaleCache,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("not a dataset container")]
    BadMagic,

    #[error("truncated data: {0}")]
    Truncated(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("unsupported version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("corrupt payload: {0}")]
    Corrupt(String),

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("training diverged at epoch {epoch}, step {step}: loss is {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },

    #[error("non-finite forces at step {0}")]
    NonFiniteForces(u64),

    #[error("frame atom count mismatch: {0} vs {1}")]
    AtomCountMismatch(usize, usize),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
