use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("map_step called on a trajectory that has already diverged")]
    AlreadyDiverged,

    #[error("cannot compute moments of an empty snapshot")]
    EmptySnapshot,

    #[error(
        "special-trajectory prediction out of regime at n = {n}: K^(n-1)·λ = {value:e} exceeds {limit:e} \
         (the approximation requires K^(n-1)·λ ≪ 1)"
    )]
    OutOfRegime { n: u32, value: f64, limit: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("series too short: need at least {needed} rows, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("fit window [{lo}, {hi}] is invalid: {reason}")]
    FitWindow {
        lo: usize,
        hi: usize,
        reason: String,
    },

    #[error("degenerate least-squares problem: {0}")]
    DegenerateFit(String),

    #[error(
        "non-finite amplitudes after the kick (Kλ/ħ = {growth:.3e}); \
         the kick factor exp(Kλ/ħ) is not representable, reduce Kλ/ħ"
    )]
    Overflow { growth: f64 },

    #[error("eigen-solver failure on a {dim}x{dim} matrix: {reason}")]
    EigenSolver { dim: usize, reason: String },

    #[error(
        "invalid bracket [{low}, {high}]: PT breaking status is `{status_low}` at the low end and `{status_high}` at the high end"
    )]
    InvalidBracket {
        low: f64,
        high: f64,
        status_low: bool,
        status_high: bool,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
