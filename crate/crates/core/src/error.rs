use thiserror::Error;

use crate::exact::DualIterate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid decoding order: {0}")]
    InvalidOrder(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("dual point is degenerate: sum of location weights is {0:e}")]
    DegenerateDual(f64),

    #[error("ellipsoid method did not converge in {iterations} iterations (relative gap {gap:e})")]
    NonConvergence {
        iterations: usize,
        gap: f64,
        last: Box<DualIterate>,
    },

    #[error("SIC matrix is not binary within {tol:e} (entry ({row}, {col}) = {value})")]
    NonBinary {
        row: usize,
        col: usize,
        value: f64,
        tol: f64,
    },

    #[error("SIC matrix does not define a bijective decode position map: {0}")]
    NotBijective(String),

    #[error("convex program rejected: {0}")]
    InvalidProgram(String),

    #[error("convex solve failed: {0}")]
    Kernel(String),

    #[error("K = {k} exceeds the exhaustive-search cap of {cap}")]
    TooManyDevices { k: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
