//! Crate-wide error type.

/// Errors produced by the compiler, the numeric kernel, and the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not unitary: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    NotUnitary { residual: f64, tol: f64 },

    #[error("frozen prefix is not orthonormal: max offending inner product {max_offense:.3e}")]
    FrozenPrefixNotOrthonormal { max_offense: f64 },

    #[error("inadmissible input: {0}")]
    Inadmissible(String),

    #[error("no admissible block size for N={n}; the minimal admissible N is {min_n}")]
    NoAdmissibleBlockSize { n: usize, min_n: usize },

    #[error("gram-schmidt retained {got} vectors where {expected} were expected")]
    RetainCount { got: usize, expected: usize },

    #[error("structure violation: {what}; max offending entry {value:.3e} at ({row},{col}){hint}")]
    Structure {
        what: String,
        value: f64,
        row: usize,
        col: usize,
        hint: String,
    },

    #[error("invalid gate at position {pos}: {reason}")]
    InvalidGate { pos: usize, reason: String },

    #[error("circuit width {circuit} does not match state width {state}")]
    WidthMismatch { circuit: usize, state: usize },

    #[error("capacity exceeded: {0} qubits requested, dense simulation is capped at 20")]
    Capacity(usize),

    #[error("function is not a bijection: {0}")]
    NonBijective(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code classification for the CLI: 2 for validation failures on the
    /// inputs, 1 for environment/internal errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Json(_) => 1,
            _ => 2,
        }
    }
}
