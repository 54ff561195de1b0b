use thiserror::Error;

/// Errors produced by grid construction, operator validation and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid construction parameters (grid sizes, ranges, caps).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A coefficient bundle violating its structural bounds.
    #[error("validation error: {0}")]
    Validation(String),

    /// Pointwise transform would overflow; names the offending node.
    #[error("overflow at node {node}: |m*u| = {magnitude} exceeds safe range")]
    Overflow { node: usize, magnitude: f64 },

    /// The exact semilinear reduction does not apply to this problem.
    #[error("unsupported reduction: {0}")]
    UnsupportedReduction(String),

    /// A sub/supersolution (or sign) gate failed before the main check ran.
    #[error("precondition not met: {0}")]
    Precondition(String),

    /// Parameter scan exhausted without satisfying the defining inequality.
    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    /// An inner solve failed where convergence was required to proceed.
    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<V> = std::result::Result<V, Error>;
