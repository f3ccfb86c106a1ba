use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid bounds: a = {a}, b = {b}, d = {d} (need b > a and d >= 2)")]
    InvalidBounds { a: f64, b: f64, d: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("near-zero pivot {value:e} at index {index}")]
    NearZeroPivot { index: usize, value: f64 },

    #[error("stability violation: dt * L = {product} >= 1")]
    StabilityViolation { product: f64 },

    #[error("iteration diverged at step {iteration} (residual {residual:e})")]
    Divergence { iteration: usize, residual: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("encoder dimension {dim} exceeds grid dimension {max}")]
    DimTooLarge { dim: usize, max: usize },

    #[error("singular unit at layer {layer}, unit {unit} (denominator {denominator:e})")]
    SingularUnit {
        layer: usize,
        unit: usize,
        denominator: f64,
    },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("loss became non-finite at epoch {epoch}: {diagnostic}")]
    NanLoss { epoch: usize, diagnostic: String },

    #[error("unknown task `{0}`")]
    UnknownTask(String),

    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("coefficient box too large: dt * L_p = {product} >= 1")]
    BoxTooLarge { product: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("sample {index}: {source}")]
    AtSample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by the caller's inputs rather than by a failure inside the library.
    pub fn is_precondition(&self) -> bool {
        match self {
            Error::InvalidBounds { .. }
            | Error::DimensionMismatch { .. }
            | Error::StabilityViolation { .. }
            | Error::DimTooLarge { .. }
            | Error::InvalidArchitecture(_)
            | Error::UnknownTask(_)
            | Error::HypothesisViolation(_)
            | Error::BoxTooLarge { .. }
            | Error::InvalidArgument(_)
            | Error::InvalidConfig(_) => true,
            Error::AtSample { source, .. } => source.is_precondition(),
            _ => false,
        }
    }

    pub(crate) fn at_sample(index: usize, source: Error) -> Self {
        Error::AtSample {
            index,
            source: Box::new(source),
        }
    }
}
