//! Dense two-phase tableau simplex with Bland's rule.
//!
//! The box-bounded problem `max c·x, Ax ≤ b, l ≤ x ≤ u` is shifted to
//! `y = x − l ≥ 0`; finite upper bounds become extra rows. Each row gets a
//! slack, and rows with a negative right-hand side are negated and given an
//! artificial variable that phase one drives to zero.

use crate::error::{Error, Result};
use crate::linalg::dot;

use super::{LinearProgram, LpSolution};

/// Pivot and feasibility tolerance.
pub const PIVOT_TOL: f64 = 1e-9;

struct Tableau {
    /// Constraint rows, each `ncols` coefficients followed by the rhs.
    rows: Vec<Vec<f64>>,
    /// Reduced costs (`c_j − z_j`) followed by the negated objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
    /// Columns that may never enter the basis.
    blocked: Vec<bool>,
    pivots: usize,
    max_pivots: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.ncols]
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let p = self.rows[r][e];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let factor = row[e];
            if factor != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                row[e] = 0.0;
            }
        }
        let factor = self.obj[e];
        if factor != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
            self.obj[e] = 0.0;
        }
        self.rows[r] = pivot_row;
        self.basis[r] = e;
        self.pivots += 1;
    }

    /// Loads cost vector `cost` (one entry per column) into the objective row.
    fn set_objective(&mut self, cost: &[f64]) {
        let mut obj = vec![0.0; self.ncols + 1];
        obj[..self.ncols].copy_from_slice(cost);
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                for (o, v) in obj.iter_mut().zip(row) {
                    *o -= cb * v;
                }
            }
        }
        self.obj = obj;
    }

    fn run(&mut self) -> Result<PhaseEnd> {
        loop {
            // Bland: lowest-index improving column
            let entering = (0..self.ncols).find(|&j| !self.blocked[j] && self.obj[j] > PIVOT_TOL);
            let Some(e) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[e];
                if a > PIVOT_TOL {
                    let ratio = row[self.ncols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            let tie = (ratio - lr).abs() <= PIVOT_TOL * (1.0 + lr.abs());
                            if ratio < lr && !tie || tie && self.basis[i] < self.basis[li] {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(PhaseEnd::Unbounded);
            };
            if self.pivots >= self.max_pivots {
                return Err(Error::Solver(format!(
                    "simplex exceeded {} pivots ({} rows, {} columns, objective {:.6e})",
                    self.max_pivots,
                    self.rows.len(),
                    self.ncols,
                    -self.obj[self.ncols]
                )));
            }
            self.pivot(r, e);
            if !self.rhs(r).is_finite() {
                return Err(Error::Solver(format!(
                    "non-finite basic value after pivot {} (row {r}, column {e})",
                    self.pivots
                )));
            }
        }
    }
}

pub(super) fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let d = lp.objective.len();
    let shift = &lp.lower;

    // rows: a·y ≤ rhs
    let mut lhs: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for (row, &b) in lp.ineq_lhs.row_iter().zip(&lp.ineq_rhs) {
        lhs.push(row.to_vec());
        rhs.push(b - dot(row, shift));
    }
    for j in 0..d {
        if lp.upper[j].is_finite() {
            let mut row = vec![0.0; d];
            row[j] = 1.0;
            lhs.push(row);
            rhs.push(lp.upper[j] - lp.lower[j]);
        }
    }
    let k = lhs.len();
    let n_art = rhs.iter().filter(|b| **b < 0.0).count();
    // columns: d structural | k slacks | artificials
    let ncols = d + k + n_art;
    let mut rows = Vec::with_capacity(k);
    let mut basis = Vec::with_capacity(k);
    let mut next_art = d + k;
    for (i, (a, b)) in lhs.iter().zip(&rhs).enumerate() {
        let mut row = vec![0.0; ncols + 1];
        if *b < 0.0 {
            for (dst, src) in row.iter_mut().zip(a) {
                *dst = -src;
            }
            row[d + i] = -1.0;
            row[next_art] = 1.0;
            row[ncols] = -b;
            basis.push(next_art);
            next_art += 1;
        } else {
            row[..d].copy_from_slice(a);
            row[d + i] = 1.0;
            row[ncols] = *b;
            basis.push(d + i);
        }
        rows.push(row);
    }

    let mut tab = Tableau {
        rows,
        obj: Vec::new(),
        basis,
        ncols,
        blocked: vec![false; ncols],
        pivots: 0,
        max_pivots: 50 * (d + k).max(1),
    };

    if n_art > 0 {
        let mut cost = vec![0.0; ncols];
        cost[d + k..].iter_mut().for_each(|c| *c = -1.0);
        tab.set_objective(&cost);
        tab.run()?;
        let infeasibility = tab.obj[ncols];
        let scale = 1.0 + rhs.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
        if infeasibility > PIVOT_TOL * scale {
            return Ok(LpSolution::Infeasible);
        }
        // drive zero-valued artificials out of the basis
        for r in 0..k {
            if tab.basis[r] >= d + k {
                if let Some(e) = (0..d + k).find(|&j| tab.rows[r][j].abs() > PIVOT_TOL) {
                    tab.pivot(r, e);
                }
            }
        }
        for j in d + k..ncols {
            tab.blocked[j] = true;
        }
    }

    let mut cost = vec![0.0; ncols];
    cost[..d].copy_from_slice(&lp.objective);
    tab.set_objective(&cost);
    match tab.run()? {
        PhaseEnd::Unbounded => Ok(LpSolution::Unbounded),
        PhaseEnd::Optimal => {
            let mut point = lp.lower.clone();
            for (r, &b) in tab.basis.iter().enumerate() {
                if b < d {
                    point[b] += tab.rhs(r).max(0.0);
                }
            }
            for j in 0..d {
                point[j] = point[j].clamp(lp.lower[j], lp.upper[j]);
            }
            let value = dot(&lp.objective, &point);
            Ok(LpSolution::Optimal { point, value })
        }
    }
}

pub(super) fn validate(lp: &LinearProgram) -> Result<()> {
    let d = lp.objective.len();
    let bad = |what: &str, found: usize, expected: usize| {
        Err(Error::Argument(format!(
            "linear program {what} has length {found}, expected {expected}"
        )))
    };
    if lp.ineq_lhs.rows() > 0 && lp.ineq_lhs.cols() != d {
        return bad("constraint matrix width", lp.ineq_lhs.cols(), d);
    }
    if lp.ineq_rhs.len() != lp.ineq_lhs.rows() {
        return bad("right-hand side", lp.ineq_rhs.len(), lp.ineq_lhs.rows());
    }
    if lp.lower.len() != d {
        return bad("lower bound", lp.lower.len(), d);
    }
    if lp.upper.len() != d {
        return bad("upper bound", lp.upper.len(), d);
    }
    let finite = lp
        .objective
        .iter()
        .chain(lp.ineq_lhs.data())
        .chain(&lp.ineq_rhs)
        .chain(&lp.lower)
        .all(|v| v.is_finite());
    if !finite {
        return Err(Error::Argument(
            "objective, constraints and lower bounds must be finite".into(),
        ));
    }
    for j in 0..d {
        if lp.upper[j].is_nan() || lp.lower[j] > lp.upper[j] {
            return Err(Error::Argument(format!(
                "bounds of variable {j} are inconsistent: [{}, {}]",
                lp.lower[j], lp.upper[j]
            )));
        }
    }
    Ok(())
}
