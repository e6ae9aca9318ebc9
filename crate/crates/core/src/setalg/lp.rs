//! Small linear programs over generator coefficients, backed by `microlp`.

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Zero-coefficient rows are decided directly; this is the absolute residual
/// they may carry before the system counts as inconsistent.
const ZERO_ROW_TOL: f64 = 1e-9;
/// Box on otherwise free coefficients. microlp can stop at non-optimal
/// vertices when variables are unbounded, and its absolute tolerances
/// scale with the bound, so it is kept small. Norms beyond it are reported
/// as infeasible, which no caller distinguishes from "far outside".
const FREE_BOUND: f64 = 1e4;

/// Equality block `rows · ξ = rhs`.
pub(crate) struct Equalities<'a> {
    pub rows: &'a DMatrix<f64>,
    pub rhs: &'a DVector<f64>,
}

fn add_equalities(problem: &mut Problem, vars: &[Variable], eqs: &Equalities<'_>) -> Result<bool> {
    for r in 0..eqs.rows.nrows() {
        let row = eqs.rows.row(r);
        let scale = row.amax();
        let rhs = eqs.rhs[r];
        if !rhs.is_finite() || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear program data"));
        }
        if scale == 0.0 {
            if rhs.abs() > ZERO_ROW_TOL * rhs.abs().max(1.0) {
                return Ok(false);
            }
            continue;
        }
        let mut expr = LinearExpr::empty();
        for (c, &v) in row.iter().enumerate() {
            if v != 0.0 {
                expr.add(vars[c], v / scale);
            }
        }
        problem.add_constraint(expr, ComparisonOp::Eq, rhs / scale);
    }
    Ok(true)
}

fn map_err(e: microlp::Error) -> Option<Error> {
    match e {
        microlp::Error::Infeasible => None,
        other => Some(Error::Lp(other.to_string())),
    }
}

/// Minimizes `cost · ξ` subject to `|ξ|∞ ≤ bound` and every equality block.
/// Returns `None` when infeasible.
pub(crate) fn minimize(
    cost: &[f64],
    bound: f64,
    blocks: &[Equalities<'_>],
) -> Result<Option<(f64, Vec<f64>)>> {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Variable> = cost
        .iter()
        .map(|&c| problem.add_var(c, (-bound, bound)))
        .collect();
    for block in blocks {
        if !add_equalities(&mut problem, &vars, block)? {
            return Ok(None);
        }
    }
    match problem.solve() {
        Ok(sol) => {
            let xi = vars.iter().map(|v| *sol.var_value(*v)).collect();
            Ok(Some((sol.objective(), xi)))
        }
        Err(e) => match map_err(e) {
            None => Ok(None),
            Some(err) => Err(err),
        },
    }
}

/// Smallest `t` such that some ξ with `|ξ|∞ ≤ t` satisfies every block.
/// `None` when the equalities are inconsistent.
pub(crate) fn min_inf_norm(p: usize, blocks: &[Equalities<'_>]) -> Result<Option<(f64, Vec<f64>)>> {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Variable> = (0..p)
        .map(|_| problem.add_var(0.0, (-FREE_BOUND, FREE_BOUND)))
        .collect();
    let t = problem.add_var(1.0, (0.0, FREE_BOUND));
    for &v in &vars {
        problem.add_constraint([(v, 1.0), (t, -1.0)], ComparisonOp::Le, 0.0);
        problem.add_constraint([(v, -1.0), (t, -1.0)], ComparisonOp::Le, 0.0);
    }
    for block in blocks {
        if !add_equalities(&mut problem, &vars, block)? {
            return Ok(None);
        }
    }
    match problem.solve() {
        Ok(sol) => {
            let xi = vars.iter().map(|v| *sol.var_value(*v)).collect();
            Ok(Some((*sol.var_value(t), xi)))
        }
        Err(e) => match map_err(e) {
            None => Ok(None),
            Some(err) => Err(err),
        },
    }
}
