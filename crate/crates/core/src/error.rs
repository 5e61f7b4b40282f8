use thiserror::Error;

/// Errors raised by the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("operating point outside validity regime: {0}")]
    OutOfValidity(String),

    #[error("step size underflow at t = {t:.6e} s (interval [{t_start:.6e}, {t_end:.6e}] s, h = {h:.3e} s); system too stiff for the explicit integrator")]
    Stiffness {
        t: f64,
        t_start: f64,
        t_end: f64,
        h: f64,
    },

    #[error("non-finite mean-field state at t = {t:.6e} s")]
    NonFinite { t: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("drift matrix is not Hurwitz; eigenvalues {eigenvalues:?}")]
    Instability { eigenvalues: Vec<(f64, f64)> },

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("conditioning probability {probability:.3e} below threshold")]
    DegenerateConditioning { probability: f64 },

    #[error("Mandel Q undefined: mean occupation {mean:.3e}")]
    UndefinedMandelQ { mean: f64 },

    #[error("truncation overflow: {0}")]
    TruncationOverflow(String),

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
