use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate bounding box (largest extent is zero)")]
    DegenerateBounds,
    #[error("invalid bounding box: min exceeds max")]
    InvalidBounds,
    #[error("quantization bit count {0} outside 1..={max}", max = crate::geom::MAX_QUANT_BITS)]
    QuantBits(u32),
    #[error("component value {value} does not fit in {bits} bits")]
    ComponentOverflow { value: u64, bits: u32 },
    #[error("interleaved width {0} exceeds 64 bits")]
    KeyOverflow(u32),
    #[error("component shape mismatch: {values} values for {bits} bit counts")]
    ShapeMismatch { values: usize, bits: usize },
    #[error("direction is not unit length (|d| = {0})")]
    NonUnitDirection(f32),
    #[error("direction is zero or not finite")]
    ZeroDirection,
    #[error("ray tmax must be positive (got {0})")]
    InvalidTmax(f32),
    #[error("ray origin is not finite")]
    NonFiniteOrigin,
    #[error("{0} requires an estimator handle that was not supplied")]
    MissingEstimator(&'static str),
    #[error("fixed ratio {0} outside (0, 1]")]
    InvalidRatio(f32),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("index list is not a permutation of 0..{0}")]
    NotPermutation(usize),
    #[error("invalid segment size {0}")]
    InvalidSegment(usize),
    #[error("warp size {0} not supported")]
    InvalidWarpSize(usize),
    #[error("empty input")]
    Empty,
    #[error("need at least {needed} rays, got {got}")]
    TooFewRays { needed: usize, got: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("division by zero in relative series at position {0}")]
    DivisionByZero(usize),
    #[error("malformed table snapshot: {0}")]
    Snapshot(&'static str),
}
