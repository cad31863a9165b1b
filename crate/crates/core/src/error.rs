use thiserror::Error;

/// Errors produced by the core numerics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel support under-resolved: d/h = {ratio:.3} < 8 (d = {d}, h = {h})")]
    KernelUnderResolved { d: f64, h: f64, ratio: f64 },
    #[error("invalid kernel spec: {0}")]
    KernelSpec(String),
    #[error("hole violates the required inclusions: {0}")]
    Hole(String),
    #[error("grid invariant violated: {0}")]
    Grid(String),
    #[error("convolution plan does not match field/kernel: {0}")]
    PlanMismatch(String),
    #[error("direct convolution oracle limited to {max} cells per side, got {n}")]
    OracleTooLarge { n: usize, max: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("search failed: {0}")]
    SearchFailed(String),
    #[error("iteration failed to converge: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
