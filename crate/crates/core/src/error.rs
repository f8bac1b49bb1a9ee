use thiserror::Error;

/// Failures surfaced by the toolkit. Property checks report violations in
/// their own report types; these variants are for operations that cannot
/// produce a meaningful result.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("step size underflow at x = {x} (k = {k}); the problem looks stiff")]
    Stiffness { x: f64, k: String },

    #[error(
        "iteration did not converge after {iterations} sweeps \
         (last increment {last_increment:.3e}, contraction estimate {contraction:.3})"
    )]
    Iteration {
        iterations: usize,
        last_increment: f64,
        contraction: f64,
    },

    #[error("ill-conditioned Jost function: |f(k,0)| = {magnitude:.3e} at k = {k}")]
    Conditioning { k: f64, magnitude: f64 },

    #[error("zero-energy resonance detected (|f(0,0)| = {magnitude:.3e}); this case is not supported")]
    Resonance { magnitude: f64 },

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("accuracy error: {0}")]
    Accuracy(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
