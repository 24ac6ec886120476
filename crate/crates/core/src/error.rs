//! Error types shared across the crate.

use thiserror::Error;

/// Failure while parsing an expression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("variable {name} at line {line}, column {column} exceeds dimension {dimension}")]
    Dimension { name: String, line: usize, column: usize, dimension: usize },
    #[error("expression mixes v and p fiber variables (line {line}, column {column})")]
    MixedRepresentation { line: usize, column: usize },
}

/// Failure while evaluating an expression or a jet operation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{function} is undefined at {argument}")]
    Domain { function: &'static str, argument: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("expression uses {expected}-variables but the point is in the {found}-representation")]
    RepresentationMismatch { expected: char, found: char },
    #[error("point has dimension {found}, expression expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter u{index} is not bound")]
    UnboundParameter { index: usize },
}

/// Errors raised by the system, calculus, normality and experiment layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("metric is singular (condition number {condition:.3e})")]
    SingularMetric { condition: f64 },
    #[error("inverse Legendre map did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("field has no derivative information")]
    MissingJets,
    #[error("degenerate point: |Ω| = {omega:.3e}")]
    DegeneratePoint { omega: f64 },
    #[error("system has no gauge tensor")]
    MissingGaugeTensor,
    #[error("gauge tensor is not symmetric in its lower indices (deviation {deviation:.3e})")]
    AsymmetricGauge { deviation: f64 },
    #[error("surface is degenerate (smallest singular value {sigma_min:.3e})")]
    DegenerateSurface { sigma_min: f64 },
    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },
    #[error("invalid system: {0}")]
    Validation(String),
}

impl Error {
    /// Errors after which a sampler should draw a fresh point.
    pub fn is_resamplable(&self) -> bool {
        matches!(
            self,
            Error::SingularMetric { .. }
                | Error::NonConvergence { .. }
                | Error::DegeneratePoint { .. }
                | Error::Eval(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
