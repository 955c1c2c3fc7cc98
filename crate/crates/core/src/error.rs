use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("Schmidt-rank-two operator has a degenerate determinant pencil")]
    DegenerateRankTwo,
    #[error("gate {index}: {msg}")]
    Ir { index: usize, msg: String },
    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SynthError>;

impl SynthError {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        SynthError::Precondition(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        SynthError::Dimension(msg.into())
    }
}
