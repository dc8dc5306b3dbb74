use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid site space: {0}")]
    InvalidSpace(String),
    #[error("dimension {d}^{n} overflows the address space")]
    DimensionOverflow { d: usize, n: usize },
    #[error("local dimensions differ: {left} vs {right}")]
    MismatchedLocalDimension { left: usize, right: usize },
    #[error("operator spaces differ: (d={0}, n={1}) vs (d={2}, n={3})")]
    SpaceMismatch(usize, usize, usize, usize),
    #[error("site {site} out of range 1..={n}")]
    SiteOutOfRange { site: usize, n: usize },
    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("eigensolver failed: {0}")]
    EigFailed(String),
    #[error("order {order} exceeds the configured bound {bound}")]
    OrderTooLarge { order: usize, bound: usize },
    #[error("target order {n} is below seed order {m}")]
    BadOrder { n: usize, m: usize },
    #[error("not a projector: {0}")]
    NotProjector(String),
    #[error("Bloch vector has norm {0} > 1")]
    OutsideBall(f64),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("perturbation norm {norm:.3e} at n={n} exceeds declared bound {bound:.3e}")]
    DecayViolation { n: usize, norm: f64, bound: f64 },
    #[error("optimizer failed: {0}")]
    OptimizerFailed(String),
    #[error("target state is not permutation invariant")]
    NotSymmetric,
    #[error("event references site {site} beyond horizon {horizon}")]
    SiteBeyondHorizon { site: usize, horizon: usize },
}

impl Error {
    /// True for failures of an iterative numerical routine, as opposed to
    /// invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::EigFailed(_) | Error::OptimizerFailed(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
