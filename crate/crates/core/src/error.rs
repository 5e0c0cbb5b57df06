use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Requested time is outside `[0, lifetime)` of the flow.
    #[error("flow expired: t = {t} is outside [0, {lifetime})")]
    FlowExpired { t: f64, lifetime: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    /// Closed-form quantity evaluated on (or too close to) the cut locus or diagonal.
    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("averaging radius {radius} exceeds admissible limit {limit}")]
    Radius { radius: f64, limit: f64 },

    /// Averaging radius would reach across components of the union.
    #[error("averaging radius {radius} is not below the cross-component separation {separation}; raise j or L0")]
    CouplingRadius { radius: f64, separation: f64 },

    #[error("field is not band-limited to degree {cap}: relative residual {residual:.3e}")]
    Truncation { residual: f64, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inequality check refused the run: {0}")]
    InequalityFailed(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
