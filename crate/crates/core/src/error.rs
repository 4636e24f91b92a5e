//! Error type shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sampled-field operations require d = 1, got d = {0}")]
    UnsupportedDimension(usize),

    #[error("grid too small: need at least {need} nodes per axis, got {got}")]
    GridTooSmall { need: usize, got: usize },

    #[error("grid too large for this operation: {cells} cells exceeds cap {cap}")]
    GridTooLarge { cells: usize, cap: usize },

    #[error("degree/order caps exceeded: m = {m}, p = {p} (caps m <= {m_cap}, p <= {p_cap})")]
    CapsExceeded {
        m: usize,
        p: usize,
        m_cap: usize,
        p_cap: usize,
    },

    #[error("function does not decay at the quadrature window boundary (residual {residual:.3e} > floor {floor:.3e})")]
    NonDecayingBoundary { residual: f64, floor: f64 },

    #[error("neglected tail above tolerance: estimated {estimate:.3e} > {tol:.3e}")]
    TailAboveTolerance { estimate: f64, tol: f64 },

    #[error("partition-of-unity residual {0:.3e} above 1e-12")]
    PartitionResidual(f64),

    #[error("query out of tabulated range: {0}")]
    OutOfRange(String),

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("time-step stability violated: dt = {dt:.3e} exceeds limit {limit:.3e}")]
    StabilityViolation { dt: f64, limit: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
