use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("conjugate gradient did not converge: relative residual {residual:e} after {iters} iterations")]
    NonConvergence { residual: f64, iters: usize },

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("compressor spec error: {0}")]
    Compressor(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
