use thiserror::Error;

/// Errors produced by the analysis toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid cascade spec: {0}")]
    InvalidSpec(String),

    #[error("child intervals {first} and {second} overlap or leave [0, 1]")]
    Overlap { first: usize, second: usize },

    #[error("weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },

    #[error("measure is atomic: fewer than two strictly positive weights")]
    Atomic,

    #[error("vector measure components do not share one geometric construction")]
    GeometryMismatch,

    #[error("kernel contract violated: {0}")]
    Contract(String),

    #[error("resource limit: {what} (limit {limit}); {hint}")]
    Resource {
        what: String,
        limit: u64,
        hint: String,
    },

    #[error("point {x} is outside the support: {measure} vanishes at radius {radius:e}")]
    OutsideSupport {
        x: f64,
        measure: String,
        radius: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
