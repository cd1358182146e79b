use thiserror::Error;

/// Errors raised by the symbolic core and the modules built on top of it.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("missing assumption: {0}")]
    AssumptionMissing(String),
    #[error("negative radicand: {0}")]
    NegativeRadicand(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("inconsistent binding for {0}")]
    InconsistentBinding(String),
    #[error("substitution made a denominator vanish: {0}")]
    SingularSubstitution(String),
    #[error("expression is not polynomial in the collected family: {0}")]
    NotPolynomial(String),
    #[error("expression is not linear in the collected family: {0}")]
    NotLinear(String),
    #[error("singular Jacobian: the chart is not invertible")]
    SingularJacobian,
    #[error("degenerate chart: {0}")]
    DegenerateChart(String),
    #[error("chart boundary: composed transformation leaves the d != 0 chart")]
    ChartBoundary,
    #[error("non-invertible transformation: {0}")]
    NonInvertible(String),
    #[error("unbound symbol in numeric evaluation: {0}")]
    UnboundSymbol(String),
    #[error("numeric domain error: {0}")]
    DomainError(String),
    #[error("singular sample point: {0}")]
    SingularPoint(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
