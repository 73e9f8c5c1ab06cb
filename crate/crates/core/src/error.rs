use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("imaginary part of the period matrix is not positive definite")]
    NonPositiveImGamma,
    #[error("theta truncation radius {0} exceeds the cap {1}")]
    TruncationOverflow(usize, usize),
    #[error("derivative order {0} exceeds the cap {1}")]
    OrderTooHigh(usize, usize),
    #[error("invalid period matrix: {0}")]
    InvalidPeriodMatrix(String),
    #[error("operation not supported by this curve backend: {0}")]
    UnsupportedBackend(String),
    #[error("theta vanishes at the requested point (|theta| = {0:e})")]
    ThetaVanishes(f64),
    #[error("kernel evaluated at its pole locus (|E| = {0:e})")]
    PoleHit(f64),
    #[error("fiber point is (nearly) ramified: |dy| = {0:e}")]
    RamifiedFiber(f64),
    #[error("fiber incomplete: found {found} of {expected} preimages")]
    FiberIncomplete { found: usize, expected: usize },
    #[error("point collides with a pole of the function")]
    PoleCollision,
    #[error("coincident poles")]
    CoincidentPoles,
    #[error("value {0} lies in the spectrum (distance {1:e})")]
    SpectrumHit(String, f64),
    #[error("singular Hankel block")]
    SingularBlock,
    #[error("pole ordering violates the real-then-conjugate-pairs convention")]
    OrderingMismatch,
    #[error("singular curve point: kernel dimension {0}")]
    SingularCurvePoint(usize),
    #[error("point is off the discriminant curve (|p| = {0:e})")]
    OffCurve(f64),
    #[error("discriminant polynomial vanishes identically")]
    DegenerateDet,
    #[error("quadrature node hits a kernel pole")]
    QuadratureDivergence,
    #[error("ill-conditioned Gram matrix (condition number {0:e})")]
    IllConditioned(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
