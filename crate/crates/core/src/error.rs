use thiserror::Error;

use crate::hilbert::TAIL_TOL;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Population in the top decile of the retained Fock levels (or lost beyond
    /// the cut) exceeds [`TAIL_TOL`].
    #[error(
        "truncation at dimension {dim}: tail mass {tail_mass:.3e} exceeds {tol:.0e}{}",
        match required { Some(r) => format!("; requires dim >= {r}"), None => String::new() },
        tol = TAIL_TOL
    )]
    Truncation { dim: usize, tail_mass: f64, required: Option<usize> },

    #[error("{what} did not converge (accuracy estimate {estimate:.3e})")]
    Convergence { what: &'static str, estimate: f64 },

    #[error("post-selection probability {probability:.3e} below floor; dark port is exactly dark")]
    DarkPortVanished { probability: f64 },

    #[error("post-selected state is orthogonal to the input (|overlap| = {overlap:.3e}); weak value undefined")]
    OrthogonalSelection { overlap: f64 },

    #[error("every grid point vanished at the dark port")]
    EmptyScan,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for the failures the command line reports as numerical (exit code 2).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Truncation { .. } | Error::Convergence { .. } | Error::EmptyScan | Error::DarkPortVanished { .. }
        )
    }
}
