use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("points per axis must be even and at least 4, got {0}")]
    OddN(usize),
    #[error("half width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("frame is not orthonormal (defect {0:e})")]
    NonOrthonormalFrame(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("bad magic bytes, expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("truncated payload: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("unknown descriptor kind `{0}`")]
    UnknownDescriptor(String),
    #[error("Im z must be nonzero for the Faddeev inverse")]
    RealZ,
    #[error("iteration did not converge after {iterations} steps (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("solve at t = {t} did not converge after {iterations} steps (relative residual {residual:e})")]
    NonConvergenceAt { t: f64, iterations: usize, residual: f64 },
    #[error("momentum at t = {t} is near an exceptional point (indicator {indicator:e})")]
    Exceptional { t: f64, indicator: f64 },
    #[error("finite-difference step {step} too large for distance {distance} to the real axis")]
    StepTooLarge { step: f64, distance: f64 },
    #[error("sweep is empty")]
    EmptySweep,
    #[error("t = {t} is not above the critical value {critical}")]
    SubcriticalT { t: f64, critical: f64 },
    #[error("reconstruction frame is not orthonormal (defect {0:e})")]
    NonOrthogonalFrame(f64),
    #[error("|zeta| = {abs_zeta} outside the open shell ({lower}, {upper})")]
    ShellBound { abs_zeta: f64, lower: f64, upper: f64 },
    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),
    #[error("quadrature order {order} cannot integrate degree {degree}")]
    QuadratureOrder { order: usize, degree: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
