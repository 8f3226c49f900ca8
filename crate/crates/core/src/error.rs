use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("generator index {index} out of range for {count} generators")]
    BadWordLetter { index: i32, count: usize },

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("t = {0} is a focal time")]
    FocalTime(f64),

    #[error("metric degenerated at tau = {tau}: {what}")]
    Degenerate { tau: f64, what: String },

    #[error("degenerate lapse equation at tau = {tau}: |K|^2 = {k2} at node {node}")]
    DegenerateLapse { tau: f64, node: usize, k2: f64 },

    #[error("step size underflow at tau = {tau} (gauge drift {drift:e})")]
    StepUnderflow { tau: f64, drift: f64 },

    #[error("newton iteration failed after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("not spacelike: max |grad phi| = {0}")]
    NotSpacelike(f64),

    #[error("empty region")]
    EmptyRegion,

    #[error("parse error: {0}")]
    Parse(String),
}
