use thiserror::Error;

use crate::linear::ValidationReport;

pub type Result<T> = std::result::Result<T, IohdError>;

#[derive(Debug, Clone, Error)]
pub enum IohdError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("{what} contains a non-finite entry")]
    NonFinite { what: String },

    #[error("{what} is not symmetric (asymmetry {residual:.3e} exceeds {threshold:.3e})")]
    NotSymmetric {
        what: String,
        residual: f64,
        threshold: f64,
    },

    #[error("{what} is singular or ill-conditioned (condition estimate {condition:.3e})")]
    Singular { what: String, condition: f64 },

    #[error("model validation failed: {0}")]
    Validation(ValidationReport),

    #[error("not IOHD for this Q: R not PSD, lambda_min = {r_min_eig:.6e}")]
    NotIohd { r_min_eig: f64 },

    #[error("B incompatible with Q: residual |B + A P C^T| = {residual:.6e}")]
    IncompatibleInput { residual: f64 },

    #[error("no symmetric P satisfies the equality B = -A P C^T (least-squares residual {residual:.6e})")]
    NoSymmetricSolution { residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resolvent (jwI - A) singular at omega = {omega}")]
    Grid { omega: f64 },

    #[error("model integrity failure at x = {x:?}: {detail}")]
    ModelIntegrity { x: Vec<f64>, detail: String },

    #[error("inconsistent decomposition: {}", format_residuals(residuals))]
    Inconsistent { residuals: Vec<(String, f64)> },

    #[error("simulation diverged; last finite state at t = {last_good_time}")]
    Divergence { last_good_time: f64 },

    #[error("graph error: {0}")]
    Graph(String),

    #[error("unknown catalog model '{0}'")]
    UnknownCatalog(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

fn format_residuals(residuals: &[(String, f64)]) -> String {
    residuals
        .iter()
        .map(|(name, value)| format!("{name} = {value:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}
