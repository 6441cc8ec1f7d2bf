use std::fmt;

use thiserror::Error;

use crate::memspace::Space;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: &'static str },

    #[error("invalid layout order {0:?}: not a permutation")]
    InvalidLayout(Vec<usize>),

    #[error("index {index:?} out of bounds for shape {shape:?}")]
    IndexOutOfBounds { index: Vec<usize>, shape: Vec<usize> },

    #[error("scatter index {index} out of range for target of length {len}")]
    ScatterIndex { index: usize, len: usize },

    #[error("{0} space is stale; sync it before access")]
    StaleSpace(Space),

    #[error("{0} space modified while the other space holds unsynced modifications")]
    ConcurrentModification(Space),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("rank count must be at least 1")]
    NoRanks,

    #[error("ghost cutoff {cutoff} exceeds half the shortest periodic box length {half_length}")]
    GhostCutoffTooLarge { cutoff: f64, half_length: f64 },

    #[error("neighbor list is stale: atom {atom} moved {displacement} > skin/2 = {limit}")]
    StaleNeighborList { atom: usize, displacement: f64, limit: f64 },

    #[error("coincident atoms at distance {0}")]
    CoincidentAtoms(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not diagonally dominant at row {row}: diagonal {diagonal} <= off-diagonal sum {off_diagonal}")]
    NotDiagonallyDominant { row: usize, diagonal: f64, off_diagonal: f64 },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residuals {residuals:?})")]
    NotConverged { iterations: usize, residuals: Vec<f64> },

    #[error("{0} requires a single rank")]
    RequiresSingleRank(&'static str),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown style '{name}'{}", NearMatches(.near))]
    UnknownStyle { name: String, near: Vec<String> },

    #[error("non-finite {quantity} at step {step}")]
    NonFinite { quantity: &'static str, step: u64 },

    #[error("script error: {0}")]
    Script(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct NearMatches<'a>(&'a [String]);

impl fmt::Display for NearMatches<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            Ok(())
        } else {
            write!(f, " (did you mean: {}?)", self.0.join(", "))
        }
    }
}
