use thiserror::Error;

/// Crate-wide error type. The CLI maps variants onto exit codes:
/// config problems -> 2, physics-domain conditions -> 3, numerics -> 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("grid sizing: {0}")]
    GridSizing(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no guided mode above the cladding index n = {cladding}")]
    Cutoff { cladding: f64 },

    #[error("mode is radiative: n_eff = {n_eff} <= cladding index {cladding}")]
    Radiative { n_eff: f64, cladding: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    EigenNonConvergence { iterations: usize, residual: f64 },

    #[error("fit did not converge after {iterations} iterations (residual norm {residual:.6e})")]
    FitNonConvergence { iterations: usize, residual: f64 },

    #[error("degenerate fit data: {0}")]
    DegenerateData(String),

    #[error("coupling scheme infeasible: {0}")]
    InfeasibleScheme(String),

    #[error("open trap: no interior minimum ({0})")]
    OpenTrap(String),

    #[error("transport failure at step {step}: {message}")]
    TransportFailure { step: usize, message: String },

    #[error("missing polarizability entry for wavelength {wavelength_nm} nm")]
    MissingPolarizability { wavelength_nm: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code for this error per the documented contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidInput(_) | Error::Io(_) => 2,
            Error::GridSizing(_) | Error::GridMismatch(_) => 2,
            Error::Cutoff { .. }
            | Error::Radiative { .. }
            | Error::InfeasibleScheme(_)
            | Error::OpenTrap(_)
            | Error::TransportFailure { .. }
            | Error::MissingPolarizability { .. } => 3,
            Error::EigenNonConvergence { .. }
            | Error::FitNonConvergence { .. }
            | Error::DegenerateData(_) => 4,
        }
    }
}
