use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("undefined ratio: boundary coordinate {0} vanishes")]
    UndefinedRatio(usize),
    #[error("singular locus: {0}")]
    SingularLocus(String),
    #[error("accuracy error: {what} (estimate {estimate:.3e}, tolerance {tol:.3e})")]
    Accuracy { what: String, estimate: f64, tol: f64 },
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
    #[error("pole at zeta = {0}")]
    Pole(f64),
    #[error("aliasing risk: {0}")]
    Aliasing(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub fn is_accuracy(&self) -> bool {
        matches!(self, Error::Accuracy { .. } | Error::Consistency(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
