use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid model parameter: {0}")]
    InvalidModel(String),

    #[error("temperature map saturated at cell {cell} (s = {entropy})")]
    Saturation { cell: usize, entropy: f64 },

    #[error("non-positive temperature {value} at {location}")]
    ConstitutiveViolation { location: String, value: f64 },

    #[error("species count mismatch: expected {expected}, found {found}")]
    SpeciesMismatch { expected: usize, found: usize },

    #[error("structure matrices: {0}")]
    Structure(String),

    #[error(
        "Xi conditions violated: |Xi2'Xi1 + Xi1'Xi2| = {skew_residual:e}, \
         |Xi2'Xi2 + Xi1'Xi1 - I| = {identity_residual:e}"
    )]
    XiViolation {
        skew_residual: f64,
        identity_residual: f64,
    },

    #[error("rank of P_e is ambiguous: singular value {singular_value:e} relative to norm {norm:e}")]
    RankAmbiguous { singular_value: f64, norm: f64 },

    #[error("boundary modulator undefined at {location}: {reason}")]
    UndefinedModulator { location: String, reason: String },

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("step rejected at t = {time}: {reason}")]
    StepRejected { time: f64, reason: String },

    #[error("invalid boundary conditions: {0}")]
    InvalidBoundary(String),

    #[error("invalid integrator: {0}")]
    InvalidIntegrator(String),
}
