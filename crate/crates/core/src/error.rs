use std::fmt;

use thiserror::Error;

/// Which of the two monotone sequences a diagnostic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sequence {
    Upper,
    Lower,
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sequence::Upper => f.write_str("upper"),
            Sequence::Lower => f.write_str("lower"),
        }
    }
}

/// A mesh node together with the component index (1 or 2) it refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct NodeRef {
    pub component: usize,
    pub i: usize,
    pub j: usize,
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "component {} at node ({}, {})",
            self.component, self.i, self.j
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh dimension too small: nx = {nx}, ny = {ny} (both must be >= 2)")]
    DimensionTooSmall { nx: usize, ny: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("non-finite {what} = {value} for {node}")]
    Evaluation {
        what: &'static str,
        node: NodeRef,
        value: f64,
    },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("zero pivot in tridiagonal solve at row {row}")]
    ZeroPivot { row: usize },

    #[error("linear solve did not converge after {iterations} sweeps (residual {residual:e})")]
    LinearNonConvergence { iterations: usize, residual: f64 },

    #[error("{sweep} sweep requires convection sign class {required} for both components")]
    DirectionIncompatible {
        sweep: &'static str,
        required: &'static str,
    },

    #[error("precondition violated: {reason} ({} offending nodes, first: {})", .nodes.len(), first_node(.nodes))]
    Precondition { reason: String, nodes: Vec<NodeRef> },

    #[error("ordering violated at step {step} in {sequence} sequence, {node}: {detail}")]
    MonotonicityViolation {
        step: usize,
        sequence: Sequence,
        node: NodeRef,
        detail: String,
    },

    #[error("Jacobi/Gauss-Seidel sandwich violated at step {step}, {node}: {detail}")]
    SandwichViolation {
        step: usize,
        node: NodeRef,
        detail: String,
    },

    #[error("Gauss-Seidel needed {iters_gs} iterations, Jacobi {iters_jacobi}")]
    ComparisonOrder {
        iters_jacobi: usize,
        iters_gs: usize,
    },

    #[error("Newton did not converge after {steps} steps (residual {residual:e})")]
    NewtonNonConvergence { steps: usize, residual: f64 },

    #[error("singular Jacobian at pivot {pivot}")]
    SingularJacobian { pivot: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn first_node(nodes: &[NodeRef]) -> String {
    nodes
        .first()
        .map(|n| n.to_string())
        .unwrap_or_else(|| "none".to_string())
}

pub type Result<T> = std::result::Result<T, Error>;
