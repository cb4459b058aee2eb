use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("control value {value} outside the volatility band [{lower}, {upper}]")]
    OutOfBand { value: f64, lower: f64, upper: f64 },

    #[error("feedback policy requires a state source for co-simulation")]
    MissingStateSource,

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("step size {dt} exceeds the stability limit {limit} = 1/(4K)")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("CFL violation: dt = {dt} but the monotone scheme needs dt <= {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("point ({x}, {y}) lies outside the solution domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("degenerate coupling: |Lambda_1| = {0:e} (requires QM != 0)")]
    DegenerateCoupling(f64),

    #[error("exponent {exponent} exceeds the overflow guard {guard}")]
    OverflowDetected { exponent: f64, guard: f64 },

    #[error("test function takes the negative value {value} at ({x}, {y})")]
    InvalidF { x: f64, y: f64, value: f64 },

    #[error("outer integrand diverges at s = {s:e}")]
    QuadratureDivergence { s: f64 },

    #[error("mismatched lengths: {0}")]
    Shape(String),
}
