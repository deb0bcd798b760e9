use thiserror::Error;

use crate::expr::{EvalError, ParseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("expression evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(
        "perturbation is not periodic with period {period}: defect {defect:e} at tau = {tau}"
    )]
    Periodicity { period: f64, defect: f64, tau: f64 },
    #[error("quadrature did not converge within {panels} panels (last difference {difference:e})")]
    Quadrature { panels: usize, difference: f64 },
    #[error("averaging hypotheses violated: {0}")]
    MatrixCondition(String),
    #[error("integration exhausted {max_steps} steps at tau = {tau}")]
    StepLimit { max_steps: usize, tau: f64 },
    #[error("integration step size underflow at tau = {tau}")]
    StepUnderflow { tau: f64 },
    #[error("epsilon too small for direct shooting (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("shooting did not converge: {0}")]
    Shooting(String),
    #[error("{0}")]
    Internal(String),
}

impl Error {
    /// True for failures caused by user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Config(_) | Error::Periodicity { .. })
    }
}
