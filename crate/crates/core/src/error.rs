use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symplectic (residual {residual:.3e} > tol {tol:.3e})")]
    NotSymplectic { residual: f64, tol: f64 },

    #[error("spectral error: {0}")]
    Spectral(String),

    #[error("unphysical input: {0}")]
    Unphysical(String),

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("saddle point unreachable: {0}")]
    SaddleUnreachable(String),

    #[error("Fock cutoff {cutoff} too small: tail {tail:.3e}, need cutoff >= {required}")]
    InsufficientCutoff { cutoff: usize, tail: f64, required: usize },

    #[error("sampler tuning error: {0}")]
    Tuning(String),

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("insufficient effective sample size: {0}")]
    InsufficientSamples(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
