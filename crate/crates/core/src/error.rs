use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the domain cube [{lo}, {hi}]^d")]
    Domain { point: Vec<f64>, lo: f64, hi: f64 },

    #[error("layer {layer} component {component} overshoots its range by {overshoot:e}")]
    RangeViolation {
        layer: usize,
        component: usize,
        overshoot: f64,
    },

    #[error("infeasible composite spec: {0}")]
    InfeasibleSpec(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("instance too large for brute force: n = {n} (max {max})")]
    TooLarge { n: usize, max: usize },

    #[error("transport problem infeasible on the supplied arc set")]
    Infeasible,

    #[error("discriminator class is empty")]
    EmptyClass,

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("amplitude too large: Jacobian floor {floor} violated (min {min})")]
    AmplitudeTooLarge { floor: f64, min: f64 },

    #[error("quadrature did not converge within {budget} nodes per axis (last change {change:e})")]
    QuadratureFailure { budget: usize, change: f64 },

    #[error("packing budget of {budget} draws exhausted with {found} of {target} codewords")]
    BudgetExceeded { budget: usize, found: usize, target: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Numerical failures map to exit code 3 in the CLI; config problems to 2.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
