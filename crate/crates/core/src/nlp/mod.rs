//! Smooth nonlinear programming: `min f(x)` subject to `c(x) = 0`, `g(x) <= 0`
//! and `l <= x <= u`.
//!
//! [`solve`] runs an augmented Lagrangian outer loop whose bound-constrained
//! subproblems are minimized by a projected limited-memory BFGS method.

mod check;
mod lbfgs;
mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use check::{check_gradient, finite_difference_derivatives, FD_STEP};
pub use solver::{
    lagrangian_optimality, max_violation, solve, write_json_lines, NlpSolution, OuterRecord,
    SolverSettings, Status,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NlpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("evaluation failed: {message}")]
    Evaluation { message: String, x: Vec<f64> },
    #[error("non-finite {what} at the current point")]
    NonFinite { what: String, x: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Analytic,
    FiniteDifference,
}

/// Objective and constraint values; equalities come first in `constraints`.
#[derive(Debug, Clone, PartialEq)]
pub struct Values {
    pub objective: f64,
    pub constraints: Vec<f64>,
}

/// Objective gradient and row-major constraint Jacobian (`m x n`).
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub gradient: Vec<f64>,
    pub jacobian: Vec<f64>,
}

pub trait NlpProblem: Sync {
    fn dimension(&self) -> usize;

    fn num_equalities(&self) -> usize {
        0
    }

    /// Count of `g(x) <= 0` rows, stored after the equalities.
    fn num_inequalities(&self) -> usize {
        0
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>);

    fn values(&self, x: &[f64]) -> Result<Values, NlpError>;

    fn gradient_mode(&self) -> GradientMode {
        GradientMode::FiniteDifference
    }

    fn derivatives(&self, x: &[f64]) -> Result<Derivatives, NlpError> {
        finite_difference_derivatives(self, x, FD_STEP)
    }

    fn num_constraints(&self) -> usize {
        self.num_equalities() + self.num_inequalities()
    }
}
