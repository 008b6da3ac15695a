//! Dense linear programming and the exact per-action contract oracle.

mod oracle;
mod simplex;

pub use oracle::{oracle_optimal_contract, OracleSolution};
pub use simplex::PIVOT_TOL;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::Matrix;

/// `maximize objective·x` subject to `ineq_lhs·x ≤ ineq_rhs` and
/// `lower ≤ x ≤ upper`. Upper bounds may be `+∞`; lower bounds must be finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub ineq_lhs: Matrix,
    pub ineq_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { point: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpSolution {
    pub fn status(&self) -> LpStatus {
        match self {
            LpSolution::Optimal { .. } => LpStatus::Optimal,
            LpSolution::Infeasible => LpStatus::Infeasible,
            LpSolution::Unbounded => LpStatus::Unbounded,
        }
    }

    pub fn point(&self) -> Option<&[f64]> {
        match self {
            LpSolution::Optimal { point, .. } => Some(point),
            _ => None,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            LpSolution::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

impl LinearProgram {
    /// An LP over the box `[lower, upper]` with no general constraints yet.
    pub fn boxed(objective: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        let d = objective.len();
        LinearProgram {
            objective,
            ineq_lhs: Matrix::zeros(0, d),
            ineq_rhs: Vec::new(),
            lower,
            upper,
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .ineq_lhs
            .row_iter()
            .zip(&self.ineq_rhs)
            .map(|(a, b)| crate::linalg::dot(a, x) - b);
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .flat_map(|(v, (l, u))| [l - v, v - u]);
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

/// Solves `lp` with a two-phase dense simplex (Bland's rule). Optimal
/// solutions are basic, i.e. vertices of the feasible polytope.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    simplex::validate(lp)?;
    simplex::solve(lp)
}
