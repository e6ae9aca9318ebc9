//! One receding-horizon solve: sequential quadratic programming on the
//! forward-Euler prediction model with a trust region on the inputs.

use std::ops::AddAssign;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{step_euler, VectorField};
use crate::error::{Error, Result};
use crate::mpc::config::MpcConfig;
use crate::mpc::qp::QpBuilder;
use crate::mpc::schedule::MembershipBlock;
use crate::setalg::IntervalBox;

const ACTIVE_TOL: f64 = 1e-7;

/// `Σₜ (xₜ − x_refₜ)ᵀQ(xₜ − x_refₜ) + (uₜ − u_refₜ)ᵀR(uₜ − u_refₜ)` over
/// the `N` stages `t = 0 … N−1`.
pub fn tracking_cost(
    states: &[DVector<f64>],
    inputs: &[DVector<f64>],
    state_refs: &[DVector<f64>],
    input_refs: &[DVector<f64>],
    cfg: &MpcConfig,
) -> Result<f64> {
    let n = cfg.horizon;
    for (what, len) in [
        ("cost states", states.len()),
        ("cost inputs", inputs.len()),
        ("cost state references", state_refs.len()),
        ("cost input references", input_refs.len()),
    ] {
        if len != n {
            return Err(Error::dim(what, n, len));
        }
    }
    let mut j = 0.0;
    for t in 0..n {
        let dx = &states[t] - &state_refs[t];
        let du = &inputs[t] - &input_refs[t];
        if dx.len() != cfg.state_dim() {
            return Err(Error::dim("cost state", cfg.state_dim(), dx.len()));
        }
        if du.len() != cfg.input_dim() {
            return Err(Error::dim("cost input", cfg.input_dim(), du.len()));
        }
        j += dx.dot(&(&cfg.state_weights * &dx)) + du.dot(&(&cfg.input_weights * &du));
    }
    Ok(j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Iteration cap reached; the best iterate satisfies the constraints.
    IterationLimit,
    /// The best iterate still leaves the tube by more than the tolerance.
    TubeInfeasible,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::IterationLimit => "iteration_limit",
            SolveStatus::TubeInfeasible => "tube_infeasible",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActiveConstraints {
    pub input_bounds: usize,
    pub rate_bounds: usize,
    /// Predicted states on (or outside) the tube boundary.
    pub tube: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcSolution {
    /// `u₀ … u_{N−1}`.
    pub inputs: Vec<DVector<f64>>,
    /// `x₀ … x_N` under the prediction model.
    pub states: Vec<DVector<f64>>,
    pub cost: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// `‖ξ‖∞ − 1` of each predicted state `x₁ … x_N` (NaN where no tube
    /// set applies).
    pub tube_slack: Vec<f64>,
    /// Largest `|x_{t+1} − x_t − Ts·g(x_t, u_t)|`.
    pub dynamics_defect: f64,
    pub active: ActiveConstraints,
}

impl MpcSolution {
    pub fn max_tube_slack(&self) -> f64 {
        self.tube_slack
            .iter()
            .filter(|s| !s.is_nan())
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }
}

/// Data of one optimal control problem.
#[derive(Debug, Clone)]
pub struct OcpProblem<'a> {
    pub x0: DVector<f64>,
    /// References for stages `0 … N−1`.
    pub state_refs: Vec<DVector<f64>>,
    pub input_refs: Vec<DVector<f64>>,
    /// Membership block for each predicted state `x₁ … x_N`.
    pub tube: Vec<Option<MembershipBlock<'a>>>,
    pub input_bounds: IntervalBox,
    /// Input applied before `u₀`, for the rate bound.
    pub previous_input: Option<DVector<f64>>,
    pub warm_start: Option<Vec<DVector<f64>>>,
}

fn simulate<F: VectorField>(
    f: &F,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
    ts: f64,
) -> Result<Vec<DVector<f64>>> {
    let mut xs = Vec::with_capacity(inputs.len() + 1);
    xs.push(x0.clone());
    for u in inputs {
        let next = step_euler(f, xs.last().unwrap(), u, ts)?;
        xs.push(next);
    }
    Ok(xs)
}

/// Clamps each input into its bounds and rate window, in time order.
fn project(
    inputs: &mut [DVector<f64>],
    bounds: &IntervalBox,
    rate: Option<&DVector<f64>>,
    previous: Option<&DVector<f64>>,
) {
    let mut prev = previous.cloned();
    for u in inputs.iter_mut() {
        for j in 0..u.len() {
            let (mut lo, mut hi) = (bounds.lower[j], bounds.upper[j]);
            if let (Some(r), Some(p)) = (rate, &prev) {
                lo = lo.max(p[j] - r[j]);
                hi = hi.min(p[j] + r[j]);
            }
            u[j] = u[j].clamp(lo, hi.max(lo));
        }
        prev = Some(u.clone());
    }
}

struct Iterate {
    inputs: Vec<DVector<f64>>,
    states: Vec<DVector<f64>>,
    cost: f64,
    slack: Vec<f64>,
    /// `Σ max(0, slack)`.
    excess: f64,
}

fn tube_slacks(problem: &OcpProblem<'_>, states: &[DVector<f64>]) -> Result<Vec<f64>> {
    problem
        .tube
        .iter()
        .enumerate()
        .map(|(t, blk)| match blk {
            None => Ok(f64::NAN),
            Some(b) => Ok(b
                .set
                .membership_norm(&states[t + 1])?
                .map_or(f64::INFINITY, |v| v - 1.0)),
        })
        .collect()
}

fn evaluate<F: VectorField>(
    f: &F,
    problem: &OcpProblem<'_>,
    cfg: &MpcConfig,
    inputs: Vec<DVector<f64>>,
) -> Result<Iterate> {
    let states = simulate(f, &problem.x0, &inputs, cfg.sampling_time)?;
    let cost = tracking_cost(
        &states[..cfg.horizon],
        &inputs,
        &problem.state_refs,
        &problem.input_refs,
        cfg,
    )?;
    let slack = tube_slacks(problem, &states)?;
    let excess = slack
        .iter()
        .filter(|s| !s.is_nan())
        .map(|s| s.max(0.0))
        .sum();
    Ok(Iterate {
        inputs,
        states,
        cost,
        slack,
        excess,
    })
}

/// `sens[t]` maps the stacked input step to `δx_t` under the linearized
/// Euler map `δx_{t+1} = (I + Ts·A)δx_t + Ts·B δu_t`.
fn sensitivities<F: VectorField>(
    f: &F,
    cfg: &MpcConfig,
    it: &Iterate,
) -> Result<Vec<DMatrix<f64>>> {
    let (n, m, horizon, ts) = (
        cfg.state_dim(),
        cfg.input_dim(),
        cfg.horizon,
        cfg.sampling_time,
    );
    let mut sens = vec![DMatrix::<f64>::zeros(n, horizon * m)];
    for t in 0..horizon {
        let (a, b) = f.jacobians(&it.states[t], &it.inputs[t])?;
        let phi = DMatrix::<f64>::identity(n, n) + a * ts;
        let mut next = &phi * &sens[t];
        next.view_mut((0, t * m), (n, m)).add_assign(&(b * ts));
        sens.push(next);
    }
    Ok(sens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Tracking cost under hard linearized tube membership.
    Track,
    /// Least total tube excess, used when the tracking QP is infeasible.
    Restore,
}

/// Builds and solves the condensed QP about `it` (states eliminated
/// through the input sensitivities). Returns the input step and the
/// predicted decrease of the phase's objective, or `None` when infeasible.
fn subproblem(
    problem: &OcpProblem<'_>,
    cfg: &MpcConfig,
    it: &Iterate,
    sens: &[DMatrix<f64>],
    radius: f64,
    phase: Phase,
) -> Result<Option<(Vec<DVector<f64>>, f64)>> {
    let (m, horizon) = (cfg.input_dim(), cfg.horizon);
    let nu = horizon * m;
    let ui = |t: usize, j: usize| t * m + j;
    let elastic = phase == Phase::Restore;

    let mut offset = nu;
    let mut tube_vars = vec![];
    for blk in &problem.tube {
        tube_vars.push(blk.map(|b| {
            let at = offset;
            offset += b.num_coefficients() + usize::from(elastic);
            at
        }));
    }
    let mut qp = QpBuilder::new(offset);

    match phase {
        Phase::Track => {
            let mut hess = DMatrix::<f64>::zeros(nu, nu);
            let mut grad = DVector::<f64>::zeros(nu);
            for t in 0..horizon {
                if t >= 1 {
                    let dev = &it.states[t] - &problem.state_refs[t];
                    let qs = &cfg.state_weights * &sens[t];
                    hess += sens[t].transpose() * &qs * 2.0;
                    grad += qs.transpose() * &dev * 2.0;
                }
                let du = &it.inputs[t] - &problem.input_refs[t];
                hess.view_mut((t * m, t * m), (m, m))
                    .add_assign(&(&cfg.input_weights * 2.0));
                grad.rows_mut(t * m, m)
                    .add_assign(&(&cfg.input_weights * &du * 2.0));
            }
            for i in 0..nu {
                qp.q[i] = grad[i];
                for j in i..nu {
                    let v = 0.5 * (hess[(i, j)] + hess[(j, i)]);
                    if v != 0.0 {
                        qp.add_hessian(i, j, v);
                    }
                }
            }
        }
        Phase::Restore => {
            // A small proximal term keeps the step unique.
            let reg = 1e-6 / (radius * radius).max(1e-300);
            for i in 0..nu {
                qp.add_hessian(i, i, reg);
            }
        }
    }

    // Input bounds, trust region and rate limits.
    for t in 0..horizon {
        for j in 0..m {
            let u = it.inputs[t][j];
            let lo = (problem.input_bounds.lower[j] - u).max(-radius);
            let hi = (problem.input_bounds.upper[j] - u).min(radius);
            qp.bounds(ui(t, j), lo.min(0.0), hi.max(0.0));
        }
    }
    if let Some(rate) = &cfg.rate_bounds {
        for t in 0..horizon {
            for j in 0..m {
                let r = rate[j];
                if t == 0 {
                    if let Some(p) = &problem.previous_input {
                        let base = it.inputs[0][j] - p[j];
                        qp.less_equal(&[(ui(0, j), 1.0)], r - base);
                        qp.less_equal(&[(ui(0, j), -1.0)], r + base);
                    }
                } else {
                    let base = it.inputs[t][j] - it.inputs[t - 1][j];
                    qp.less_equal(&[(ui(t, j), 1.0), (ui(t - 1, j), -1.0)], r - base);
                    qp.less_equal(&[(ui(t, j), -1.0), (ui(t - 1, j), 1.0)], r + base);
                }
            }
        }
    }

    let mut sigmas = vec![];
    for (t, blk) in problem.tube.iter().enumerate() {
        if let (Some(b), Some(at)) = (blk, tube_vars[t]) {
            let p = b.num_coefficients();
            let rows = b
                .set
                .zonotope_part()
                .radius()
                .map(|r| if r > 0.0 { r } else { 1.0 });
            let sigma = elastic.then_some(at + p);
            b.add_to(
                &mut qp,
                &it.states[t + 1],
                &rows,
                Some((0, &sens[t + 1])),
                at,
                sigma,
            );
            if let Some(s) = sigma {
                qp.q[s] = 1.0;
                qp.bounds(s, 0.0, f64::INFINITY);
                sigmas.push(s);
            }
        }
    }

    let Some(sol) = qp.solve()? else {
        return Ok(None);
    };
    let step = (0..horizon)
        .map(|t| DVector::from_fn(m, |j, _| sol.z[ui(t, j)]))
        .collect();
    let decrease = match phase {
        Phase::Track => -sol.objective,
        Phase::Restore => it.excess - sigmas.iter().map(|&s| sol.z[s].max(0.0)).sum::<f64>(),
    };
    Ok(Some((step, decrease)))
}

fn count_active(problem: &OcpProblem<'_>, cfg: &MpcConfig, it: &Iterate) -> ActiveConstraints {
    let mut act = ActiveConstraints::default();
    let b = &problem.input_bounds;
    let mut prev = problem.previous_input.clone();
    for u in &it.inputs {
        for j in 0..u.len() {
            if u[j] - b.lower[j] <= ACTIVE_TOL || b.upper[j] - u[j] <= ACTIVE_TOL {
                act.input_bounds += 1;
            }
            if let (Some(r), Some(p)) = (&cfg.rate_bounds, &prev) {
                if r[j] - (u[j] - p[j]).abs() <= ACTIVE_TOL {
                    act.rate_bounds += 1;
                }
            }
        }
        prev = Some(u.clone());
    }
    act.tube = it.slack.iter().filter(|s| **s >= -ACTIVE_TOL).count();
    act
}

/// Solves the tracking problem from `problem.x0`. Inputs always satisfy
/// their bounds and rate limits exactly; tube membership is elastic and
/// its residual is reported through the status.
pub fn solve_ocp<F: VectorField>(
    f: &F,
    problem: &OcpProblem<'_>,
    cfg: &MpcConfig,
) -> Result<MpcSolution> {
    cfg.validate()?;
    let (n, m, horizon) = (cfg.state_dim(), cfg.input_dim(), cfg.horizon);
    f.check_dims(n, m)?;
    if problem.x0.len() != n {
        return Err(Error::dim("initial state", n, problem.x0.len()));
    }
    for (what, len) in [
        ("state references", problem.state_refs.len()),
        ("input references", problem.input_refs.len()),
        ("tube blocks", problem.tube.len()),
    ] {
        if len != horizon {
            return Err(Error::dim(what, horizon, len));
        }
    }
    if problem.input_bounds.dim() != m {
        return Err(Error::dim("input bounds", m, problem.input_bounds.dim()));
    }

    let mut inputs = match &problem.warm_start {
        Some(w) if w.len() == horizon => w.clone(),
        _ => problem.input_refs.clone(),
    };
    project(
        &mut inputs,
        &problem.input_bounds,
        cfg.rate_bounds.as_ref(),
        problem.previous_input.as_ref(),
    );
    let mut it = evaluate(f, problem, cfg, inputs)?;
    let mut radius = cfg.trust_radius;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let sens = sensitivities(f, cfg, &it)?;
        let sub = match subproblem(problem, cfg, &it, &sens, radius, Phase::Track) {
            Ok(Some((step, dec))) => Ok((Phase::Track, step, dec)),
            Ok(None) => {
                subproblem(problem, cfg, &it, &sens, radius, Phase::Restore).and_then(|r| {
                    let (step, dec) =
                        r.ok_or_else(|| Error::Solver("input constraints admit no step".into()))?;
                    Ok((Phase::Restore, step, dec))
                })
            }
            Err(e) => Err(e),
        };
        let (phase, step, predicted) = match sub {
            Ok(s) => s,
            // A failed subproblem counts as a rejected step.
            Err(Error::Solver(msg)) => {
                log::debug!("QP subproblem failed ({msg}); shrinking the trust region");
                radius *= 0.25;
                if radius <= cfg.tol_stationarity {
                    break;
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let move_size = step.iter().map(|s| s.amax()).fold(0.0, f64::max);
        let stalled = match phase {
            // While outside the tube a tracking step may raise the cost.
            Phase::Track => {
                it.excess <= cfg.tol_constraint && predicted <= 1e-12 * (1.0 + it.cost.abs())
            }
            Phase::Restore => predicted <= 1e-9 * (1.0 + it.excess),
        };
        if move_size <= cfg.tol_stationarity || stalled {
            converged = phase == Phase::Track;
            break;
        }
        let mut trial: Vec<DVector<f64>> =
            it.inputs.iter().zip(&step).map(|(u, d)| u + d).collect();
        project(
            &mut trial,
            &problem.input_bounds,
            cfg.rate_bounds.as_ref(),
            problem.previous_input.as_ref(),
        );
        let candidate = match evaluate(f, problem, cfg, trial) {
            Ok(c) => Some(c),
            Err(Error::Singularity(_)) | Err(Error::NonFinite(_)) => None,
            Err(e) => return Err(e),
        };
        // Feasibility first, then cost.
        let feasible_now = it.excess <= cfg.tol_constraint;
        let actual = candidate.as_ref().map(|c| match phase {
            Phase::Track if feasible_now => {
                if c.excess <= cfg.tol_constraint {
                    it.cost - c.cost
                } else {
                    f64::NEG_INFINITY
                }
            }
            Phase::Track if c.excess < it.excess => f64::INFINITY,
            Phase::Track => f64::NEG_INFINITY,
            Phase::Restore => it.excess - c.excess,
        });
        match (candidate, actual) {
            (Some(c), Some(gain)) if gain >= 1e-4 * predicted.abs() => {
                if gain > 0.75 * predicted.abs() {
                    radius = (radius * 2.0).min(cfg.trust_radius * 16.0);
                }
                it = c;
            }
            _ => {
                radius *= 0.25;
                if radius <= cfg.tol_stationarity {
                    converged = phase == Phase::Track;
                    break;
                }
            }
        }
    }

    let mut defect: f64 = 0.0;
    for t in 0..horizon {
        let pred = step_euler(f, &it.states[t], &it.inputs[t], cfg.sampling_time)?;
        defect = defect.max((&it.states[t + 1] - pred).amax());
    }
    let worst = it
        .slack
        .iter()
        .filter(|s| !s.is_nan())
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let status = if worst > cfg.tol_constraint {
        SolveStatus::TubeInfeasible
    } else if converged {
        SolveStatus::Optimal
    } else {
        SolveStatus::IterationLimit
    };
    let active = count_active(problem, cfg, &it);
    Ok(MpcSolution {
        inputs: it.inputs,
        states: it.states,
        cost: it.cost,
        status,
        iterations,
        tube_slack: it.slack,
        dynamics_defect: defect,
        active,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::scalar::Scalar;
    use crate::setalg::{ConstrainedZonotope, Zonotope};
    use proptest::prelude::*;

    /// `ṗ = v, v̇ = u`.
    pub(crate) struct DoubleIntegrator;

    impl VectorField for DoubleIntegrator {
        fn state_dim(&self) -> usize {
            2
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, x: &[S], u: &[S]) -> Vec<S> {
            vec![x[1].clone(), u[0].clone()]
        }
    }

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    pub(crate) fn lq_config(horizon: usize) -> MpcConfig {
        let mut cfg = MpcConfig::new(2, 1, 0.1);
        cfg.horizon = horizon;
        cfg.state_weights = DMatrix::from_diagonal(&dv(&[10.0, 1.0]));
        cfg.input_weights = DMatrix::from_element(1, 1, 0.5);
        cfg.rate_bounds = None;
        cfg.trust_radius = 100.0;
        cfg
    }

    fn wide_inputs() -> IntervalBox {
        IntervalBox::new(dv(&[-1e3]), dv(&[1e3])).unwrap()
    }

    fn problem(x0: DVector<f64>, cfg: &MpcConfig, bounds: IntervalBox) -> OcpProblem<'static> {
        OcpProblem {
            x0,
            state_refs: vec![DVector::zeros(2); cfg.horizon],
            input_refs: vec![DVector::zeros(1); cfg.horizon],
            tube: vec![None; cfg.horizon],
            input_bounds: bounds,
            previous_input: None,
            warm_start: None,
        }
    }

    /// Finite-horizon LQ feedback by the backward Riccati recursion, with
    /// the final state unweighted.
    fn riccati_inputs(x0: &DVector<f64>, cfg: &MpcConfig) -> Vec<f64> {
        let ts = cfg.sampling_time;
        let a = DMatrix::from_row_slice(2, 2, &[1.0, ts, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, ts]);
        let (q, r) = (&cfg.state_weights, &cfg.input_weights);
        let mut p = DMatrix::zeros(2, 2);
        let mut gains = vec![];
        for _ in 0..cfg.horizon {
            let s = r + b.transpose() * &p * &b;
            let k = s.try_inverse().unwrap() * b.transpose() * &p * &a;
            p = q + a.transpose() * &p * (&a - &b * &k);
            gains.push(k);
        }
        gains.reverse();
        let mut x = x0.clone();
        let mut us = vec![];
        for k in &gains {
            let u = -(k * &x);
            us.push(u[0]);
            x = &a * &x + &b * &u;
        }
        us
    }

    #[test]
    fn cost_of_reference_is_zero_and_scales_with_weight() {
        let cfg = MpcConfig::new(6, 2, 0.1);
        let n = cfg.horizon;
        let x = vec![dv(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]); n];
        let u = vec![dv(&[0.3, -0.9]); n];
        assert_eq!(tracking_cost(&x, &u, &x, &u, &cfg).unwrap(), 0.0);
        let mut moved = x.clone();
        moved[7][2] += 0.25;
        let j = tracking_cost(&moved, &u, &x, &u, &cfg).unwrap();
        assert!((j - 100.0 * 0.0625).abs() < 1e-12);
        assert!(tracking_cost(&x[1..], &u, &x, &u, &cfg).is_err());
    }

    #[test]
    fn matches_finite_horizon_lq() {
        let cfg = lq_config(15);
        let x0 = dv(&[1.0, -0.5]);
        let sol = solve_ocp(
            &DoubleIntegrator,
            &problem(x0.clone(), &cfg, wide_inputs()),
            &cfg,
        )
        .unwrap();
        let want = riccati_inputs(&x0, &cfg);
        for (u, w) in sol.inputs.iter().zip(&want) {
            assert!((u[0] - w).abs() < 1e-6, "{} vs {}", u[0], w);
        }
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.dynamics_defect <= cfg.tol_dynamics);
    }

    #[test]
    fn optimum_at_consistent_reference() {
        let cfg = lq_config(10);
        let x0 = dv(&[2.0, 0.0]);
        let mut p = problem(x0.clone(), &cfg, wide_inputs());
        p.state_refs = vec![x0; cfg.horizon];
        let sol = solve_ocp(&DoubleIntegrator, &p, &cfg).unwrap();
        assert!(sol.cost <= 1e-9);
        assert!(sol.inputs.iter().all(|u| u[0].abs() < 1e-6));
    }

    #[test]
    fn tighter_bounds_never_lower_the_cost() {
        let cfg = lq_config(12);
        let x0 = dv(&[1.0, 0.0]);
        let free = solve_ocp(
            &DoubleIntegrator,
            &problem(x0.clone(), &cfg, wide_inputs()),
            &cfg,
        )
        .unwrap();
        let tight = IntervalBox::new(dv(&[-0.5]), dv(&[0.5])).unwrap();
        let held = solve_ocp(&DoubleIntegrator, &problem(x0, &cfg, tight), &cfg).unwrap();
        assert!(held.inputs.iter().all(|u| u[0].abs() <= 0.5));
        assert!(held.active.input_bounds > 0);
        assert!(held.cost >= free.cost - 1e-9);
    }

    #[test]
    fn enormous_tube_changes_nothing() {
        let cfg = lq_config(10);
        let x0 = dv(&[1.0, -0.3]);
        let free = solve_ocp(
            &DoubleIntegrator,
            &problem(x0.clone(), &cfg, wide_inputs()),
            &cfg,
        )
        .unwrap();
        let huge: ConstrainedZonotope =
            Zonotope::from_half_widths(dv(&[0.0, 0.0]), &dv(&[1e4, 1e4]))
                .unwrap()
                .into();
        let mut p = problem(x0, &cfg, wide_inputs());
        p.tube = vec![Some(MembershipBlock { set: &huge }); cfg.horizon];
        let boxed = solve_ocp(&DoubleIntegrator, &p, &cfg).unwrap();
        for (a, b) in free.inputs.iter().zip(&boxed.inputs) {
            assert!((a[0] - b[0]).abs() < 1e-8, "{} vs {}", a[0], b[0]);
        }
        assert!(boxed.max_tube_slack() < -0.99);
    }

    #[test]
    fn tube_holds_the_prediction() {
        // Position must stay in [0.8, 1.2]; the unconstrained plan pulls it to 0.
        let cfg = lq_config(10);
        let x0 = dv(&[1.0, 0.0]);
        let tube: ConstrainedZonotope =
            Zonotope::from_half_widths(dv(&[1.0, 0.0]), &dv(&[0.2, 10.0]))
                .unwrap()
                .into();
        let mut p = problem(x0, &cfg, wide_inputs());
        p.tube = vec![Some(MembershipBlock { set: &tube }); cfg.horizon];
        let sol = solve_ocp(&DoubleIntegrator, &p, &cfg).unwrap();
        assert_ne!(sol.status, SolveStatus::TubeInfeasible);
        assert!(sol.max_tube_slack() <= cfg.tol_constraint);
        for x in &sol.states[1..] {
            assert!(x[0] >= 0.8 - 1e-6 && x[0] <= 1.2 + 1e-6);
        }
        assert!(sol.active.tube > 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn inputs_respect_bounds_and_rates(
            p0 in -3.0..3.0f64, v0 in -2.0..2.0f64, lim in 0.05..2.0f64, rate in 0.01..0.5f64, prev in -0.05..0.05f64,
        ) {
            let mut cfg = lq_config(8);
            cfg.rate_bounds = Some(dv(&[rate]));
            cfg.trust_radius = 0.5;
            let bounds = IntervalBox::new(dv(&[-lim]), dv(&[lim])).unwrap();
            let mut p = problem(dv(&[p0, v0]), &cfg, bounds);
            p.previous_input = Some(dv(&[prev]));
            let sol = solve_ocp(&DoubleIntegrator, &p, &cfg).unwrap();
            let mut last = prev;
            for u in &sol.inputs {
                prop_assert!(u[0].abs() <= lim);
                prop_assert!((u[0] - last).abs() <= rate * (1.0 + 1e-12));
                last = u[0];
            }
            prop_assert!(sol.dynamics_defect <= cfg.tol_dynamics);
            let j = tracking_cost(&sol.states[..cfg.horizon], &sol.inputs, &p.state_refs, &p.input_refs, &cfg).unwrap();
            prop_assert!((j - sol.cost).abs() <= 1e-9 * (1.0 + j));
        }
    }
}
