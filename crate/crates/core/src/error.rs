use crate::dataset::Label;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: label {code:?} is not 1 (skin) or 2 (non-skin)")]
    InvalidLabel { line: usize, code: String },

    #[error("need at least 2 samples to split, got {0}")]
    TooFewSamples(usize),

    #[error("test fraction {0} must lie strictly between 0 and 1")]
    InvalidTestFraction(f64),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("training set has no {0} samples")]
    MissingClass(Label),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pixel ({x}, {y}) is outside the {width}x{height} map")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("ROC analysis needs at least one skin and one non-skin label")]
    SingleClass,

    #[error("score {0} is not finite")]
    NonFiniteScore(f64),

    #[error("not a binary {expected} file (bad magic number)")]
    BadMagic { expected: &'static str },

    #[error("unsupported maxval {0}; only 8-bit (maxval 255) rasters are supported")]
    UnsupportedDepth(u32),

    #[error("truncated raster payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("malformed raster header: {0}")]
    BadHeader(String),

    #[error("invalid dimensions: {0}")]
    Dimensions(String),

    #[error("model file line {line}: {message}")]
    ModelFile { line: usize, message: String },

    #[error("metrics report: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
