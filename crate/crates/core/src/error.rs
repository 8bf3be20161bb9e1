use crate::solver::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("field has {found} samples, grid expects {expected}")]
    Shape { expected: usize, found: usize },

    #[error("{what}: linear solve did not converge (iterations {}, residual {:.3e})", report.iterations, report.residual)]
    Solver { what: &'static str, report: SolveReport },

    #[error("{what}: fixed-point iteration did not converge after {iterations} passes (last change {delta:.3e})")]
    Picard { what: &'static str, iterations: usize, delta: f64 },

    #[error("density left [{lower}, {upper}]: min {min:.12e}, max {max:.12e}")]
    MaximumPrinciple { lower: f64, upper: f64, min: f64, max: f64 },

    #[error("body has zero mass on the grid (left the domain?)")]
    BodyLost,

    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    #[error("time {t} outside the trajectory range [0, {end}]")]
    OutOfRange { t: f64, end: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("step {step} failed ({dump}): {source}")]
    StepFailed { step: usize, dump: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
