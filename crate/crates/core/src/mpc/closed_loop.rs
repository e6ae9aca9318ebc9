//! Receding-horizon loop: solve, apply the first input to the plant, shift.

use log::warn;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rk4_step, step_euler, VectorField};
use crate::error::{Error, Result};
use crate::mpc::config::{MpcConfig, PlantModel};
use crate::mpc::ocp::{solve_ocp, OcpProblem, SolveStatus};
use crate::mpc::reference::ReferenceTrajectory;
use crate::mpc::schedule::{MembershipBlock, TubeSchedule};
use crate::setalg::IntervalBox;

/// RK4 sub-steps per sample in the plant.
pub const PLANT_SUBSTEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopStatus {
    Solved(SolveStatus),
    /// The solve failed; the previous input was held.
    Fallback,
}

impl LoopStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            LoopStatus::Solved(s) => s.as_str(),
            LoopStatus::Fallback => "fallback_hold",
        }
    }
}

/// One logged sample: the state at `t` and the input applied over
/// `[t, t + Ts)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopRecord {
    pub t: f64,
    pub state: DVector<f64>,
    pub input: DVector<f64>,
    /// Predicted cost of the plan (NaN on fallback).
    pub cost: f64,
    /// `‖ξ‖∞ − 1` of the state in its tube set at `t` (NaN without a tube,
    /// +∞ when the state cannot be represented).
    pub tube_slack: f64,
    pub status: LoopStatus,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoop {
    pub sampling_time: f64,
    pub records: Vec<LoopRecord>,
    pub final_time: f64,
    pub final_state: DVector<f64>,
    pub final_tube_slack: f64,
    pub fallbacks: usize,
}

impl ClosedLoop {
    pub fn states(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.records
            .iter()
            .map(|r| &r.state)
            .chain(std::iter::once(&self.final_state))
    }

    pub fn max_tube_slack(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.tube_slack)
            .chain(std::iter::once(self.final_tube_slack))
            .filter(|s| !s.is_nan())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn plant_step<F: VectorField>(
    f: &F,
    x: &DVector<f64>,
    u: &DVector<f64>,
    cfg: &MpcConfig,
) -> Result<DVector<f64>> {
    match cfg.plant {
        PlantModel::Euler => step_euler(f, x, u, cfg.sampling_time),
        PlantModel::Rk4 => {
            let dt = cfg.sampling_time / PLANT_SUBSTEPS as f64;
            let mut x = x.clone();
            for _ in 0..PLANT_SUBSTEPS {
                x = rk4_step(f, &x, u, dt)?;
            }
            Ok(x)
        }
    }
}

fn slack_at(schedule: Option<&TubeSchedule>, x: &DVector<f64>, t: f64) -> Result<f64> {
    schedule.map_or(Ok(f64::NAN), |s| s.slack_at(x, t))
}

fn build_problem<'a>(
    x: &DVector<f64>,
    k0: usize,
    reference: &ReferenceTrajectory,
    schedule: Option<&'a TubeSchedule>,
    input_bounds: &IntervalBox,
    previous: Option<&DVector<f64>>,
    warm: Option<Vec<DVector<f64>>>,
    cfg: &MpcConfig,
) -> Result<OcpProblem<'a>> {
    let ts = cfg.sampling_time;
    let t0 = k0 as f64 * ts;
    let tube = match schedule {
        None => vec![None; cfg.horizon],
        Some(s) => {
            let (path, _) = s.select_branch(x, t0)?;
            (1..=cfg.horizon)
                .map(|j| {
                    s.set_at(path, t0 + j as f64 * ts)
                        .map(|set| MembershipBlock { set })
                })
                .collect()
        }
    };
    Ok(OcpProblem {
        x0: x.clone(),
        state_refs: (0..cfg.horizon)
            .map(|j| reference.state(k0 + j).clone())
            .collect(),
        input_refs: (0..cfg.horizon)
            .map(|j| reference.input(k0 + j).clone())
            .collect(),
        tube,
        input_bounds: input_bounds.clone(),
        previous_input: previous.cloned(),
        warm_start: warm,
    })
}

/// Runs the controller from `x0` for `duration` seconds. Solver failures
/// hold the previous input (clamped to the bounds) and are flagged; model
/// failures of the plant itself are returned as errors.
pub fn mpc_loop<F: VectorField>(
    f: &F,
    x0: &DVector<f64>,
    schedule: Option<&TubeSchedule>,
    reference: &ReferenceTrajectory,
    input_bounds: &IntervalBox,
    cfg: &MpcConfig,
    duration: f64,
) -> Result<ClosedLoop> {
    cfg.validate()?;
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument(
            "closed-loop duration must be positive".into(),
        ));
    }
    if reference.is_empty() {
        return Err(Error::InvalidArgument(
            "reference trajectory is empty".into(),
        ));
    }
    let ts = cfg.sampling_time;
    let samples = (duration / ts - 1e-9).ceil().max(1.0) as usize;
    let mut x = x0.clone();
    let mut previous: Option<DVector<f64>> = None;
    let mut warm: Option<Vec<DVector<f64>>> = None;
    let mut records = Vec::with_capacity(samples);
    let mut fallbacks = 0;

    for k in 0..samples {
        let t = k as f64 * ts;
        let slack = slack_at(schedule, &x, t)?;
        let solved = build_problem(
            &x,
            k,
            reference,
            schedule,
            input_bounds,
            previous.as_ref(),
            warm.take(),
            cfg,
        )
        .and_then(|p| solve_ocp(f, &p, cfg));
        let (u, cost, status, iterations) = match solved {
            Ok(sol) => {
                let u = sol.inputs[0].clone();
                let mut shifted = sol.inputs[1..].to_vec();
                shifted.push(sol.inputs.last().unwrap().clone());
                warm = Some(shifted);
                (u, sol.cost, LoopStatus::Solved(sol.status), sol.iterations)
            }
            Err(
                e @ (Error::Solver(_) | Error::Singularity(_) | Error::NonFinite(_) | Error::Lp(_)),
            ) => {
                warn!("t = {t:.3} s: controller failed ({e}); holding the previous input");
                fallbacks += 1;
                let held = previous
                    .clone()
                    .unwrap_or_else(|| reference.input(k).clone());
                let u = DVector::from_fn(held.len(), |j, _| {
                    held[j].clamp(input_bounds.lower[j], input_bounds.upper[j])
                });
                (u, f64::NAN, LoopStatus::Fallback, 0)
            }
            Err(e) => return Err(e),
        };
        let next = plant_step(f, &x, &u, cfg)?;
        records.push(LoopRecord {
            t,
            state: x,
            input: u.clone(),
            cost,
            tube_slack: slack,
            status,
            iterations,
        });
        previous = Some(u);
        x = next;
    }
    let final_time = samples as f64 * ts;
    let final_tube_slack = slack_at(schedule, &x, final_time)?;
    Ok(ClosedLoop {
        sampling_time: ts,
        records,
        final_time,
        final_state: x,
        final_tube_slack,
        fallbacks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::ocp::tests::{lq_config, DoubleIntegrator};
    use crate::setalg::Zonotope;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    /// Constant-acceleration reference generated by the Euler map itself.
    fn consistent_reference(x0: &DVector<f64>, u: f64, ts: f64, len: usize) -> ReferenceTrajectory {
        let mut states = vec![x0.clone()];
        for _ in 1..len {
            let x = states.last().unwrap();
            states.push(dv(&[x[0] + ts * x[1], x[1] + ts * u]));
        }
        ReferenceTrajectory::new(ts, states, vec![dv(&[u]); len]).unwrap()
    }

    #[test]
    fn nominal_plant_tracks_a_consistent_reference() {
        let mut cfg = lq_config(10);
        cfg.plant = PlantModel::Euler;
        let x0 = dv(&[0.0, 1.0]);
        let reference = consistent_reference(&x0, 0.3, cfg.sampling_time, 80);
        let bounds = IntervalBox::new(dv(&[-1.0]), dv(&[1.0])).unwrap();
        let run = mpc_loop(&DoubleIntegrator, &x0, None, &reference, &bounds, &cfg, 5.0).unwrap();
        assert_eq!(run.records.len(), 50);
        for (k, x) in run.states().enumerate() {
            assert!((x - reference.state(k)).amax() <= 1e-6, "k = {k}");
        }
        assert_eq!(run.fallbacks, 0);
    }

    #[test]
    fn rk4_plant_stays_in_tube_and_is_deterministic() {
        let mut cfg = lq_config(10);
        cfg.rate_bounds = Some(dv(&[1.0]));
        let x0 = dv(&[1.0, 0.0]);
        let tube: crate::setalg::ConstrainedZonotope =
            Zonotope::from_half_widths(dv(&[1.0, 0.0]), &dv(&[0.3, 2.0]))
                .unwrap()
                .into();
        let schedule = TubeSchedule {
            time_step: 1.0,
            paths: vec![crate::mpc::BranchPath {
                branch: 0,
                boundary: vec![tube.clone(); 4],
                during: vec![tube.clone(); 3],
                terminated: false,
            }],
        };
        let reference =
            ReferenceTrajectory::new(0.1, vec![dv(&[0.0, 0.0])], vec![dv(&[0.0])]).unwrap();
        let bounds = IntervalBox::new(dv(&[-2.0]), dv(&[2.0])).unwrap();
        let a = mpc_loop(
            &DoubleIntegrator,
            &x0,
            Some(&schedule),
            &reference,
            &bounds,
            &cfg,
            3.0,
        )
        .unwrap();
        let b = mpc_loop(
            &DoubleIntegrator,
            &x0,
            Some(&schedule),
            &reference,
            &bounds,
            &cfg,
            3.0,
        )
        .unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert!(a.max_tube_slack() <= 1e-6, "{}", a.max_tube_slack());
        // The reference pulls toward 0, so the position settles near the edge.
        assert!(a.final_state[0] < 0.75);
        let mut last: Option<f64> = None;
        for r in &a.records {
            assert!(r.input[0].abs() <= 2.0);
            if let Some(l) = last {
                assert!((r.input[0] - l).abs() <= 1.0 + 1e-12);
            }
            last = Some(r.input[0]);
        }
    }
}
