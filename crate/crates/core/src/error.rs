use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point at distance {at} lies outside the open ball of radius {radius}")]
    OutsideBall { radius: f64, at: f64 },

    #[error("point at distance {at} is on the singular ring of radius {radius}")]
    SingularRing { radius: f64, at: f64 },

    #[error("incompatible lattices: {0}")]
    IncompatibleGrids(String),

    #[error("point {point:?} is within {margin} of the grid hull boundary (need {required})")]
    TooCloseToBoundary { point: Vec<f64>, margin: f64, required: f64 },

    #[error("tail integral diverges: growth exponent {alpha} is not below 2s = {two_s}")]
    TailNotIntegrable { alpha: f64, two_s: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("domain has no interior lattice points")]
    EmptyInterior,

    #[error("domain is unbounded: {0}")]
    Unbounded(String),

    #[error("base point {0:?} is not in the domain")]
    PointNotInDomain(Vec<f64>),

    #[error("Newton stagnated after {iterations} iterations (residual {residual:.3e})")]
    NewtonStagnation { iterations: usize, residual: f64, history: Vec<f64> },

    #[error("singular Jacobian at Newton iteration {iteration}")]
    SingularJacobian { iteration: usize, iterate: Vec<f64> },

    #[error("nonlinearity has no declared Lipschitz constant")]
    MissingLipschitz,

    #[error("sampling budget exhausted: {0}")]
    SamplingBudget(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
