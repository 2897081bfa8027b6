use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An iterative refinement did not reach its tolerance.
    #[error("{what} did not converge: last delta {last_delta:e}")]
    Convergence { what: &'static str, last_delta: f64 },

    /// Amplitudes became non-finite or exceeded the overflow ceiling.
    #[error("numerical overflow at kick {kick}: max |A_n| = {max_amplitude:e}")]
    Overflow { kick: u64, max_amplitude: f64 },

    #[error("eigensolver failed after {iterations} iterations ({unconverged} eigenvalues unconverged)")]
    Eigensolver { iterations: usize, unconverged: usize },

    #[error("eigenvalue {index} is zero; quasienergy undefined")]
    DegenerateEigenvalue { index: usize },

    /// The two kick-matrix routes disagree beyond the configured tolerance.
    #[error("kick-matrix routes disagree: max entrywise difference {max_diff:e} > {tolerance:e}")]
    RouteMismatch { max_diff: f64, tolerance: f64 },

    /// A step inside a trajectory or scan failed; carries where it happened.
    #[error("at {location}: {source}")]
    At {
        location: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at(self, location: impl Into<String>) -> Self {
        Error::At { location: location.into(), source: Box::new(self) }
    }

    /// The innermost error, skipping location wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::At { source, .. } => source.root(),
            other => other,
        }
    }
}
