use thiserror::Error;

/// Crate-wide error type.
///
/// Numerical routines in this crate refuse to fabricate values: whenever an
/// input leaves the domain where an estimator or closed form is meaningful,
/// the failure is reported through one of these variants instead of being
/// papered over with NaN.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("state became non-finite at x = {x} ({context})")]
    NonFiniteState { x: f64, context: &'static str },

    #[error("price overflow: exp({x}) exceeds f64 range")]
    PriceOverflow { x: f64 },

    #[error("price underflow: exp({x}) rounds to zero")]
    PriceUnderflow { x: f64 },

    #[error("point {point} lies outside the tabulated support")]
    OutOfSupport { point: f64 },

    #[error("integrability failure at x = {x}, q = {q}: {detail}")]
    IntegrabilityFailure { x: f64, q: f64, detail: String },

    #[error("trajectory left the ergodic working range (max |x| = {max_abs_x})")]
    NonErgodicInput { max_abs_x: f64 },

    #[error("too few batches: got {got}, need at least {need}")]
    TooFewBatches { got: usize, need: usize },

    #[error("too few valid curve points: got {got}, need at least {need}")]
    InsufficientValidPoints { got: usize, need: usize },

    #[error("no sign change of the cumulant curve inside the search range")]
    NoRootInRange { curve: Vec<(f64, f64)> },

    #[error("weights degenerate at theta = {theta} (ess = {ess:.2})")]
    DegenerateWeights { theta: f64, ess: f64 },

    #[error("failure probability never reaches 1/2 on the grid, nothing to certify against")]
    NoAeaSupport,

    #[error("threshold rate b too large: admissible maximum is {max_b}")]
    AdmissibleBExceeded { max_b: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
