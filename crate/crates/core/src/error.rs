use thiserror::Error;

use crate::model::InformationPattern;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("assumption {assumption} violated at grid point {index} (t = {t}): {detail}")]
    AssumptionViolation {
        assumption: &'static str,
        index: usize,
        t: f64,
        detail: String,
    },

    #[error("weight {name} must be positive, found {value} at t = {t}")]
    NonpositiveWeight { name: &'static str, value: f64, t: f64 },

    #[error("{0}")]
    InvalidInput(String),

    #[error("f2 is nonzero and {name} = 0, so the ratio {ratio} is undefined at t = 0")]
    SingularRatio { name: &'static str, ratio: &'static str },

    #[error("time {t} lies outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },

    #[error("{quantity} blew up at grid point {index} (t = {t}, value = {value})")]
    BlowUp {
        quantity: &'static str,
        index: usize,
        t: f64,
        value: f64,
    },

    #[error("array length mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("operation requires pattern {expected}, model uses {found}")]
    PatternMismatch {
        expected: InformationPattern,
        found: InformationPattern,
    },

    #[error("perturbation direction is not deterministic and may not be adapted to the player's information")]
    NotAdapted,

    #[error("scenario is not deterministic: {0}")]
    NotDeterministic(&'static str),

    #[error("first-order condition system is singular (pivot {pivot:e})")]
    SingularSystem { pivot: f64 },

    #[error("matrix is singular (determinant {det:e})")]
    SingularMatrix { det: f64 },

    #[error("matrix is not orthogonal: max |sigma sigma^T - I| = {deviation:e}")]
    NotOrthogonal { deviation: f64 },

    #[error("line {line}: key `{key}`: {message}")]
    Parse {
        line: usize,
        key: String,
        message: String,
    },
}
