//! Sparse convex QP assembly on top of clarabel:
//! `min ½zᵀPz + qᵀz` subject to equality rows and `≤` rows.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::error::{Error, Result};

#[derive(Debug, Default)]
struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    rhs: Vec<f64>,
}

impl Rows {
    fn push(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        let r = self.rhs.len();
        for &(j, v) in coeffs {
            if v != 0.0 {
                self.i.push(r);
                self.j.push(j);
                self.v.push(v);
            }
        }
        self.rhs.push(rhs);
    }
}

#[derive(Debug)]
pub(crate) struct QpBuilder {
    n: usize,
    pi: Vec<usize>,
    pj: Vec<usize>,
    pv: Vec<f64>,
    pub q: Vec<f64>,
    eq: Rows,
    le: Rows,
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution {
    pub z: Vec<f64>,
    pub objective: f64,
}

impl QpBuilder {
    pub fn new(n: usize) -> Self {
        QpBuilder {
            n,
            pi: vec![],
            pj: vec![],
            pv: vec![],
            q: vec![0.0; n],
            eq: Rows::default(),
            le: Rows::default(),
        }
    }

    /// Adds `v` to `P[i][j]` and `P[j][i]` (once on the diagonal).
    pub fn add_hessian(&mut self, i: usize, j: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.pi.push(a);
        self.pj.push(b);
        self.pv.push(v);
    }

    pub fn equality(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        self.eq.push(coeffs, rhs);
    }

    pub fn less_equal(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        self.le.push(coeffs, rhs);
    }

    /// `lo ≤ z[j] ≤ hi`; infinite sides are skipped.
    pub fn bounds(&mut self, j: usize, lo: f64, hi: f64) {
        if hi.is_finite() {
            self.less_equal(&[(j, 1.0)], hi);
        }
        if lo.is_finite() {
            self.less_equal(&[(j, -1.0)], -lo);
        }
    }

    /// `Ok(None)` when the constraints are infeasible.
    pub fn solve(self) -> Result<Option<QpSolution>> {
        let n = self.n;
        // Curvature normalized to unit magnitude; the solver's tolerances
        // are partly absolute.
        let mag = self.pv.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let norm = if mag > 0.0 && mag.is_finite() {
            mag
        } else {
            1.0
        };
        let pv: Vec<f64> = self.pv.iter().map(|v| v / norm).collect();
        let q: Vec<f64> = self.q.iter().map(|v| v / norm).collect();
        let p = CscMatrix::new_from_triplets(n, n, self.pi, self.pj, pv);
        let m_eq = self.eq.rhs.len();
        let m_le = self.le.rhs.len();
        let mut ai = self.eq.i;
        let mut aj = self.eq.j;
        let mut av = self.eq.v;
        ai.extend(self.le.i.iter().map(|r| r + m_eq));
        aj.extend(self.le.j);
        av.extend(self.le.v);
        let a = CscMatrix::new_from_triplets(m_eq + m_le, n, ai, aj, av);
        let mut b = self.eq.rhs;
        b.extend(self.le.rhs);
        let mut cones = vec![];
        if m_eq > 0 {
            cones.push(SupportedConeT::ZeroConeT(m_eq));
        }
        if m_le > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(m_le));
        }
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(200)
            .build()
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        solver.solve();
        let status = solver.solution.status;
        match status {
            SolverStatus::Solved => {}
            SolverStatus::AlmostSolved => log::debug!("QP solved to reduced accuracy"),
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                return Ok(None)
            }
            other => {
                return Err(Error::Solver(format!(
                    "QP solver stopped with status {other:?}"
                )))
            }
        }
        Ok(Some(QpSolution {
            z: solver.solution.x.clone(),
            objective: solver.solution.obj_val * norm,
        }))
    }
}
