use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::problem::{check_f_max, Contract, ContractProblem};

use super::{solve_lp, LinearProgram, LpSolution};

/// Utilities closer than this count as equal when checking the oracle's
/// contract against the agent's actual best response.
const VERIFY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub contract: Contract,
    pub value: f64,
    pub action: usize,
}

/// LP for implementing `action` at least cost:
/// maximize `E[v | a] − p(·|a)·f` over `f ∈ [0, f_max]^m` subject to
/// `(p(·|j) − p(·|a))·f ≤ c(j) − c(a)` for every other action `j`.
pub fn action_lp(problem: &ContractProblem, action: usize, f_max: f64) -> LinearProgram {
    let (n, m) = (problem.n_actions(), problem.n_outcomes());
    let prob = problem.prob();
    let target = prob.row(action);
    let mut lhs = Matrix::zeros(n - 1, m);
    let mut rhs = Vec::with_capacity(n - 1);
    for (row, j) in (0..n).filter(|&j| j != action).enumerate() {
        for (dst, (pj, pa)) in lhs.row_mut(row).iter_mut().zip(prob.row(j).iter().zip(target)) {
            *dst = pj - pa;
        }
        rhs.push(problem.cost()[j] - problem.cost()[action]);
    }
    LinearProgram {
        objective: target.iter().map(|p| -p).collect(),
        ineq_lhs: lhs,
        ineq_rhs: rhs,
        lower: vec![0.0; m],
        upper: vec![f_max; m],
    }
}

/// Exact optimal contract on `[0, f_max]^m`: one LP per action, best
/// feasible value wins (lowest action index on ties).
pub fn oracle_optimal_contract(problem: &ContractProblem, f_max: f64) -> Result<OracleSolution> {
    check_f_max(f_max)?;
    let per_action: Vec<Result<Option<(Vec<f64>, f64)>>> = (0..problem.n_actions())
        .into_par_iter()
        .map(|a| {
            let lp = action_lp(problem, a, f_max);
            Ok(match solve_lp(&lp)? {
                LpSolution::Optimal { point, value } => {
                    Some((point, value + problem.expected_value(a)?))
                }
                LpSolution::Infeasible => None,
                LpSolution::Unbounded => {
                    return Err(Error::Internal(format!("action {a}: boxed LP reported unbounded")))
                }
            })
        })
        .collect();

    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for (a, outcome) in per_action.into_iter().enumerate() {
        if let Some((point, value)) = outcome? {
            if best.as_ref().map_or(true, |(_, _, v)| value > *v) {
                best = Some((a, point, value));
            }
        }
    }
    let (action, point, value) = best.ok_or_else(|| {
        Error::Internal("every per-action LP is infeasible under weak IC constraints".into())
    })?;

    let contract = Contract::clamped(point);
    let response = problem.best_response(&contract)?;
    if response.action != action && (response.principal_utility - value).abs() > VERIFY_TOL {
        return Err(Error::Internal(format!(
            "oracle contract implements action {} (u^p {}) instead of {action} (u^p {value})",
            response.action, response.principal_utility
        )));
    }
    Ok(OracleSolution {
        contract,
        value,
        action,
    })
}
