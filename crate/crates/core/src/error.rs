use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("time samples must be strictly increasing and start at 0 ({0})")]
    NonIncreasingTimes(String),

    #[error("mass must be positive and finite, got {0}")]
    InvalidMass(f64),

    #[error("force table covers [{start}, {end}] but t = {t} was requested")]
    TableSpan { start: f64, end: f64, t: f64 },

    #[error(
        "quadratic form is not elliptic: D0*F0 - E0^2 = {det} (D0 = {d0}, E0 = {e0}, F0 = {f0})"
    )]
    NonElliptic { d0: f64, e0: f64, f0: f64, det: f64 },

    #[error("quadratic form is degenerate: |E^2 - D F| = {0}")]
    DegenerateForm(f64),

    #[error("conserved quantity drifted: {0}")]
    ConservationDrift(String),

    #[error("root finder did not converge: {0}")]
    NoConvergence(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("state is not resolvable on the grid: {0}")]
    ResolutionExceeded(String),

    #[error("phase integrand has imaginary part {imag} at t = {t}")]
    NonRealIntegrand { t: f64, imag: f64 },

    #[error("momentum coefficient A(t) = {0} vanishes; eigenstates would be position deltas")]
    ZeroMomentumCoefficient(f64),

    #[error("least-squares multistart failed: {0}")]
    OptimizerFailure(String),

    #[error("degenerate state: ||I psi|| = {0}")]
    DegenerateState(f64),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown identifier `{name}` at line {line}, column {column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
