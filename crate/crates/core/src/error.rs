use thiserror::Error;

use crate::params::ProblemCase;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("kappa = {kappa} <= 0: value may be infinite")]
    KappaNonPositive { kappa: f64 },

    #[error("homogeneous closed form requires l = 0 (got l = {l})")]
    NotHomogeneousCase { l: f64 },

    #[error("state-independent closed form requires k = 0 and l > 0 (got k = {k}, l = {l})")]
    NotStateIndependentCase { k: f64, l: f64 },

    #[error("no numerical solver for case {0:?}")]
    UnsupportedCase(ProblemCase),

    #[error("initial wealth {x0} is below the feasibility floor {x_e}")]
    InfeasibleWealth { x0: f64, x_e: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("Newton iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("convexity lost at y = {y:e} (v_yy = {v_yy:e}); widen the dual domain")]
    ConvexityLoss { y: f64, v_yy: f64 },

    #[error("wealth {x} outside table range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("policy inadmissible at x = {x}: c = {c} < kx + l = {floor}")]
    PolicyInadmissible { x: f64, c: f64, floor: f64 },

    #[error("non-finite wealth on path {path} at step {step}")]
    NumericalBlowup { path: usize, step: usize },

    #[error("path {path} breached the wealth floor at step {step} with clamping disabled")]
    FloorBreached { path: usize, step: usize },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
