//! Error type shared by the whole crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem with model inputs (dimensions, counts).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A probability outside `[0, 1]` or a non-finite entry.
    #[error("probability {value} out of range in {what}")]
    ProbRange { what: &'static str, value: f64 },

    /// A stochastic row (or the initial vector) does not sum to one.
    #[error("{what} {index} sums to {sum}, expected 1 within {tol}")]
    RowSum {
        what: &'static str,
        index: usize,
        sum: f64,
        tol: f64,
    },

    /// Symbol code outside the model alphabet. `position` is 1-based when
    /// the symbol came from a sequence.
    #[error("symbol {symbol} out of range at position {position}")]
    SymbolRange { symbol: usize, position: u64 },

    /// State index outside the model.
    #[error("state {state} out of range (m = {m})")]
    StateRange { state: usize, m: usize },

    #[error("sequence and path lengths differ ({seq} vs {path})")]
    LengthMismatch { seq: usize, path: usize },

    #[error("empty sequence")]
    EmptySequence,

    /// No state can explain the sequence at this 1-based position.
    #[error("sequence impossible under model at position {position}")]
    ImpossibleSequence { position: u64 },

    /// Brute-force enumeration refused (`m > 6`, `n > 12`, or `m^n` too big).
    #[error("brute-force instance too large (m = {m}, n = {n})")]
    BruteForceTooLarge { m: usize, n: usize },

    #[error("invalid parameter: {0}")]
    Domain(String),

    /// Text-format problem in a model or sequence file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors meaning "the data cannot be explained by the model",
    /// as opposed to malformed inputs. The CLI maps these to exit code 3.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::ImpossibleSequence { .. })
    }
}
