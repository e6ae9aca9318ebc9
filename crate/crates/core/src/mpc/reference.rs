use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reach::ReachTube;
use crate::setalg::IntervalBox;

/// Per-sample references; queries past the end hold the last entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrajectory {
    pub sampling_time: f64,
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
}

impl ReferenceTrajectory {
    pub fn new(
        sampling_time: f64,
        states: Vec<DVector<f64>>,
        inputs: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if states.is_empty() || inputs.is_empty() {
            return Err(Error::InvalidArgument("reference must not be empty".into()));
        }
        if !(sampling_time > 0.0) {
            return Err(Error::InvalidArgument(
                "sampling time must be positive".into(),
            ));
        }
        Ok(ReferenceTrajectory {
            sampling_time,
            states,
            inputs,
        })
    }

    pub fn state(&self, k: usize) -> &DVector<f64> {
        &self.states[k.min(self.states.len() - 1)]
    }

    pub fn input(&self, k: usize) -> &DVector<f64> {
        &self.inputs[k.min(self.inputs.len() - 1)]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Center of the tube at step `k`: the set center for a single branch,
/// the midpoint of the union hull when the tube has split.
pub fn tube_center(tube: &ReachTube, k: usize) -> Result<Option<DVector<f64>>> {
    let sets = tube.sets_at(k);
    match sets.len() {
        0 => Ok(None),
        1 => Ok(Some(sets[0].center().clone())),
        _ => Ok(tube.hull_at(k)?.map(|h| h.center())),
    }
}

/// States follow the tube centers, linearly interpolated to the sampling
/// grid over `[0, duration]`; inputs sit at the midpoint of `bounds`.
pub fn reference_from_tube(
    tube: &ReachTube,
    bounds: &IntervalBox,
    sampling_time: f64,
    duration: f64,
) -> Result<ReferenceTrajectory> {
    if !(sampling_time > 0.0 && duration >= 0.0) {
        return Err(Error::InvalidArgument(
            "sampling time and duration must be positive".into(),
        ));
    }
    let mut centers = vec![];
    for k in 0..=tube.num_steps() {
        match tube_center(tube, k)? {
            Some(c) => centers.push(c),
            None => break,
        }
    }
    let last = centers.len() - 1;
    let samples = (duration / sampling_time).round() as usize;
    let states = (0..=samples)
        .map(|i| {
            let s = i as f64 * sampling_time / tube.time_step;
            let j = (s.floor() as usize).min(last);
            if j == last {
                return centers[last].clone();
            }
            let w = s - j as f64;
            &centers[j] * (1.0 - w) + &centers[j + 1] * w
        })
        .collect();
    let u_ref = bounds.center();
    ReferenceTrajectory::new(sampling_time, states, vec![u_ref])
}
