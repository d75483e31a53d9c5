use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Configuration failed validation; every violated invariant is listed.
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("spectral parameter |eta| = {modulus:.6} outside the admissible disk of radius {radius:.6}; use a smaller h")]
    Inadmissible { modulus: f64, radius: f64 },

    #[error("truncation error: |F(L)| / max|F| = {ratio:.3e} exceeds {tol:.1e}; increase L")]
    Truncation { ratio: f64, tol: f64 },

    #[error("discretization error: {0}")]
    Discretization(String),

    #[error("Newton iteration failed after {iterations} steps (|mu| = {mu_modulus:.4}, |G| = {residual:.3e}); try a smaller h or bisect in h")]
    NewtonDivergence {
        iterations: usize,
        mu_modulus: f64,
        residual: f64,
    },

    #[error("compatibility residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    Inconsistent { residual: f64, tol: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("grid under-resolved: {0}")]
    Resolution(String),

    #[error("singular matrix at row {0}")]
    Singular(usize),

    #[error("energy increased by {increase:.3e} (relative) at step {step}; scheme unstable")]
    Instability { step: usize, increase: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
