use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entries in {0}")]
    NonFinite(String),
    #[error("matrix is singular to working precision (condition estimate {condition:e})")]
    Singular { condition: f64 },
    #[error("eigenvalue iteration did not converge within {iterations} iterations")]
    EigenNoConvergence { iterations: usize },
    #[error("matrix is not symmetric")]
    Asymmetric,
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("gain is not stabilizing (spectral radius of closed loop {rho})")]
    NotStabilizing { rho: f64 },
    #[error("Riccati iteration did not converge in {iterations} iterations (residual {residual:e}); plant may not be stabilizable")]
    NotStabilizable { iterations: usize, residual: f64 },
    #[error("certainty-equivalence breakdown: gain does not stabilize the estimate (spectral radius {rho})")]
    CertaintyEquivalence { rho: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("contraction estimate failed: all {samples} samples hit a singular step operator")]
    EstimationFailed { samples: usize },
    #[error("state diverged at t={t}: |x| = {norm:e} exceeds cap {cap:e}")]
    Divergence { t: usize, norm: f64, cap: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
