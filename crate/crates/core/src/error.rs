//! Error type shared by all core modules.

use alloc::string::String;
use core::fmt;

/// Errors raised by core operations. Each variant carries enough context to
/// report the failure without re-deriving it from inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two buffers that must agree in shape do not.
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// A matrix with zero rows or columns where content is required.
    EmptyMatrix,
    /// Pixel buffer length does not match width x height x 3.
    BadPixelBuffer { expected: usize, got: usize },
    /// Prediction and label vectors differ in length.
    LengthMismatch { left: usize, right: usize },
    /// An operation that needs at least one caption got none.
    EmptyManifest,
    /// Fewer candidate tokens in the frequency band than requested.
    InsufficientCandidates { found: usize, requested: usize },
    /// Rejection sampling gave up after the iteration cap.
    ExhaustedAttempts { attempts: usize },
    /// More distinct token sets requested than the pool can provide.
    PoolTooSmall { capacity: u128, requested: usize },
    /// Token-set size bounds violate 1 <= L <= R <= |pool|.
    InvalidBounds { min: usize, max: usize, pool: usize },
    /// TWA injection count exceeds the dataset size.
    MTooLarge { m: usize, n: usize },
    /// An activation token set must hold at least one token.
    EmptyTokenSet,
    /// Detector training set contains only one class.
    SingleClassTrainingSet,
    /// Training loss left the finite range.
    NonFiniteLoss { epoch: usize },
    /// Ledger already holds an entry for this user.
    DuplicateUser { user_id: u64 },
    /// Two ledger entries share the same token set; tracing is ill-posed.
    NonDistinctLedger,
    /// A degradation parameter is outside its stated range.
    BadDegradeParam { what: &'static str },
    /// JPEG encode or decode failed inside a codec.
    CodecFailure { detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => write!(
                f,
                "dimension mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::EmptyMatrix => write!(f, "matrix has no elements"),
            Error::BadPixelBuffer { expected, got } => write!(
                f,
                "pixel buffer length {got} does not match dimensions (expected {expected})"
            ),
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::EmptyManifest => write!(f, "manifest holds no caption pairs"),
            Error::InsufficientCandidates { found, requested } => write!(
                f,
                "only {found} tokens in the frequency band, {requested} requested"
            ),
            Error::ExhaustedAttempts { attempts } => {
                write!(f, "rejection sampling exhausted after {attempts} attempts")
            }
            Error::PoolTooSmall {
                capacity,
                requested,
            } => write!(
                f,
                "pool admits {capacity} distinct sets, {requested} users requested"
            ),
            Error::InvalidBounds { min, max, pool } => write!(
                f,
                "set-size bounds L={min}, R={max} invalid for pool of {pool}"
            ),
            Error::MTooLarge { m, n } => {
                write!(f, "cannot modify {m} of {n} pairs")
            }
            Error::EmptyTokenSet => write!(f, "activation token set is empty"),
            Error::SingleClassTrainingSet => {
                write!(f, "training set holds a single class")
            }
            Error::NonFiniteLoss { epoch } => {
                write!(f, "loss became non-finite at epoch {epoch}")
            }
            Error::DuplicateUser { user_id } => {
                write!(f, "ledger already holds user {user_id}")
            }
            Error::NonDistinctLedger => {
                write!(f, "ledger token sets are not pairwise distinct")
            }
            Error::BadDegradeParam { what } => {
                write!(f, "degradation parameter out of range: {what}")
            }
            Error::CodecFailure { detail } => write!(f, "codec failure: {detail}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
