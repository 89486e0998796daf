use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("degenerate set: {0}")]
    DegenerateSet(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("eigensolver did not converge (residual {residual:e}): {message}")]
    Numerical { residual: f64, message: String },

    #[error("exhaustive search needs {required} evaluations, budget is {limit}; use a heuristic strategy")]
    Budget { required: u128, limit: u128 },

    #[error("selector mode error: {0}")]
    Mode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}
