use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("input contains non-finite entries")]
    NonFinite,

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (eigenvalue {eigenvalue:.6e} at or below tolerance)")]
    NotPositiveDefinite { eigenvalue: f64 },

    #[error(
        "matrix is rank deficient: {deficient} of {dim} eigenvalues below tolerance \
         (add trials or remove redundant channels)"
    )]
    RankDeficient { deficient: usize, dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "class-mean covariances are indistinguishable: ||2d - 1||_2 = {norm:.3e} is below threshold"
    )]
    DegenerateClasses { norm: f64 },

    #[error("selected subspaces are semi-empty: {0}")]
    SemiEmpty(String),

    #[error("null-space reduction is not applicable: target null space is semi-empty; fall back to {fallback}")]
    InapplicableProjector { fallback: &'static str },

    #[error("pooled feature covariance is singular even after ridge {ridge:.3e}; increase the ridge")]
    SingularCovariance { ridge: f64 },

    #[error("cross-validation plan infeasible: {0}")]
    InfeasibleFolds(String),

    #[error("epoch windows out of recording bounds for events {events:?}")]
    OutOfBounds { events: Vec<usize> },
}

impl Error {
    /// True for failures caused by the numerics of otherwise well-formed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite
                | Error::NotSymmetric { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::RankDeficient { .. }
                | Error::DegenerateClasses { .. }
                | Error::SingularCovariance { .. }
        )
    }
}
