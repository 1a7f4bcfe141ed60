use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Variants map onto the failure modes the tools report: geometric
/// preconditions (grazing, trapped, concave windows) are distinct from plain
/// input problems so the CLI can choose an exit code.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("coordinate {value} outside of [0, {length}]")]
    OutOfDomain { value: f64, length: f64 },

    #[error("derivative of order {order} not supported (max {max})")]
    UnsupportedDerivative { order: usize, max: usize },

    #[error("invalid warp: {0}")]
    InvalidWarp(String),

    #[error("trapped: no boundary crossing within length {0}")]
    Trapped(f64),

    #[error("tolerance failure: step size fell to {0:e}")]
    ToleranceFailure(f64),

    #[error("grazing direction: Clairaut constant {clairaut} reaches min f")]
    Grazing { clairaut: f64 },

    #[error("no turning point: f never descends to {0}")]
    NoTurningPoint(f64),

    #[error("degenerate turning point at y = {depth} (|f'| = {slope:e})")]
    DegenerateTurning { depth: f64, slope: f64 },

    #[error("no chord joins the boundary points at separation {0}")]
    NoChord(f64),

    #[error("shooting failed: {0}")]
    ShootingFailed(String),

    #[error("non-transversal chord: 1 - g^11 (d tau)^2 = {0:e}")]
    NonTransversal(f64),

    #[error("concave window: no interior chord near x0 = {0}")]
    ConcaveWindow(f64),

    #[error("finite differences unstable at order {order}: Richardson levels differ by {gap:e}")]
    FdUnstable { order: usize, gap: f64 },

    #[error("degenerate directions: condition number {0:e}")]
    DegenerateDirections(f64),

    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("query ({x1}, {x2}) outside of the distance window")]
    OutOfWindow { x1: f64, x2: f64 },

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Whether the failure is numerical (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::InvalidWarp(_)
                | Error::InvalidInput(_)
                | Error::Io(_)
                | Error::GridMismatch(_)
                | Error::OutOfDomain { .. }
                | Error::OutOfWindow { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
