//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Hardcoded minimal networks exist only for 2..=4 wires.
    #[error("no hardcoded minimal network for {wires} wires (supported: 2..=4)")]
    UnsupportedSize { wires: usize },

    #[error("input has {actual} values but the network has {expected} wires")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("{wires} wires exceed the exhaustive enumeration cap of {cap}")]
    TooManyWires { wires: usize, cap: usize },

    #[error("layer input has dimension {actual}, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("patch side {side} exceeds the supported maximum of {max}")]
    PatchTooLarge { side: usize, max: usize },

    #[error("pixel value {value} is not binary")]
    NonBinaryPixel { value: u8 },

    #[error("proving injectivity for {bits}-bit patches needs 2^{bits} codes, above the cap of 2^{cap}")]
    EnumerationTooLarge { bits: usize, cap: usize },

    #[error("mantissa budget must be at least 1 bit")]
    InvalidMantissa,

    #[error("{needed} patch bits exceed the {available} reliably encodable bits")]
    PrecisionInsufficient { needed: usize, available: usize },

    #[error("patch at ({row}, {col}) does not fit inside the image")]
    PositionOutOfBounds { row: usize, col: usize },

    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),

    #[error("could not place all patches after {attempts} attempts")]
    PlacementFailed { attempts: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("malformed dataset: {0}")]
    BadDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
