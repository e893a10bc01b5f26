use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("support mismatch: {0}")]
    SupportMismatch(String),
    #[error("lattice size {ell} exceeds cap {cap}")]
    CapExceeded { ell: usize, cap: usize },
    #[error("{0} is not strictly below {1} in the step relation")]
    NotComparable(String, String),
    #[error("coincident points: |a - b| = {0:e}")]
    CoincidentPoints(f64),
    #[error("degenerate point configuration: {0}")]
    DegenerateConfig(String),
    #[error("degenerate spectrum: gap {gap:e} below tolerance {tol:e}")]
    DegenerateSpectrum { gap: f64, tol: f64 },
    #[error("spectral parameter collides with a pole: distance {0:e}")]
    PoleCollision(f64),
    #[error("spectral parameter within {0:e} of an eigenvalue")]
    ResolventPole(f64),
    #[error("QR iteration did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("eigenvalue gap {0:e} too small for a stable eigenbasis")]
    NearDefective(f64),
    #[error("windows overlap: eps = {eps} but Dist/2 = {half_dist}")]
    WindowOverlap { eps: f64, half_dist: f64 },
    #[error("spot check failed: {0}")]
    SpotCheck(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// True for failures caused by the numerical data rather than malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::CoincidentPoints(_)
                | Error::DegenerateConfig(_)
                | Error::DegenerateSpectrum { .. }
                | Error::PoleCollision(_)
                | Error::ResolventPole(_)
                | Error::NonConvergence(_)
                | Error::NearDefective(_)
                | Error::SpotCheck(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
