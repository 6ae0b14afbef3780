use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("Q violates symmetry: max |Q - Qᵀ| = {asym:e} exceeds {bound:e}")]
    NotSymmetric { asym: f64, bound: f64 },

    #[error("Re Q violates positivity: smallest eigenvalue {min_eig:e} below {bound:e}")]
    NotPositive { min_eig: f64, bound: f64 },

    #[error("polynomial of degree {0} where degree <= 2 is required")]
    DegreeTooHigh(usize),

    #[error("{rule}: loss parameter mu = {mu} must exceed {threshold}")]
    LossBelowThreshold {
        rule: &'static str,
        mu: f64,
        threshold: f64,
    },

    #[error("{rule}: order s* = {s_star} exceeds s1 + s2 = {sum}")]
    OrderRule { rule: &'static str, s_star: f64, sum: f64 },

    #[error("{rule}: geometric condition violated: {detail}")]
    Condition { rule: &'static str, detail: String },

    #[error("matrix is singular or too ill-conditioned (condition number {0:e})")]
    SingularMatrix(f64),

    #[error("fan radius {0} exceeds pi/4")]
    FanRadius(f64),

    #[error("aliasing: {fraction:e} of the spectral mass lies within 3 bins of Nyquist")]
    Aliasing { fraction: f64 },

    #[error("window mismatch: field built with width {field}, inversion asked for {asked}")]
    WindowMismatch { field: f64, asked: f64 },

    #[error("kernel oscillation not resolved: cell size * max |grad phase| = {value} >= pi/2")]
    Unresolved { value: f64 },

    #[error("Hermite truncation tail carries {fraction:e} of the mass (limit 1%)")]
    TruncationTail { fraction: f64 },

    #[error("method not applicable: {0}")]
    NotApplicable(String),

    #[error("time {0} outside (0, pi/2) and splitting disabled")]
    TimeOutOfRange(f64),

    #[error("scenario {id}: {source}")]
    Scenario { id: String, source: Box<Error> },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
