use nalgebra::DVector;

use crate::dynamics::field::VectorField;
use crate::error::{Error, Result};

/// One forward-Euler step `x + Ts·g(x, u)`.
pub fn step_euler<F: VectorField>(
    f: &F,
    x: &DVector<f64>,
    u: &DVector<f64>,
    ts: f64,
) -> Result<DVector<f64>> {
    if !(ts > 0.0) {
        return Err(Error::InvalidArgument("step size must be positive".into()));
    }
    Ok(x + f.rates(x, u)? * ts)
}

/// One classical Runge–Kutta step with the input held constant.
pub fn rk4_step<F: VectorField>(
    f: &F,
    x: &DVector<f64>,
    u: &DVector<f64>,
    dt: f64,
) -> Result<DVector<f64>> {
    let k1 = f.rates(x, u)?;
    let k2 = f.rates(&(x + &k1 * (0.5 * dt)), u)?;
    let k3 = f.rates(&(x + &k2 * (0.5 * dt)), u)?;
    let k4 = f.rates(&(x + &k3 * dt), u)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Input held constant over consecutive segments of equal length; the last
/// value is held beyond the final segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    pub period: f64,
    pub values: Vec<DVector<f64>>,
}

impl PiecewiseConstant {
    pub fn new(period: f64, values: Vec<DVector<f64>>) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::InvalidArgument(
                "segment length must be positive".into(),
            ));
        }
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "control signal has no segments".into(),
            ));
        }
        Ok(PiecewiseConstant { period, values })
    }

    pub fn constant(u: DVector<f64>) -> Self {
        PiecewiseConstant {
            period: f64::INFINITY,
            values: vec![u],
        }
    }

    pub fn segment(&self, t: f64) -> usize {
        let k = (t / self.period).floor();
        if k.is_finite() && k > 0.0 {
            (k as usize).min(self.values.len() - 1)
        } else {
            0
        }
    }

    pub fn at(&self, t: f64) -> &DVector<f64> {
        &self.values[self.segment(t)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &DVector<f64> {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }
}

fn steps_in(span: f64, dt: f64, what: &str) -> Result<usize> {
    let n = (span / dt).round();
    if !(n >= 1.0) || (n * dt - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "step {dt} does not divide the {what} {span}"
        )));
    }
    Ok(n as usize)
}

/// RK4 samples at `0, dt, …, t_f`; `dt` must divide both `t_f` and the
/// control segment length so that no step straddles a switch.
pub fn integrate_rk4<F: VectorField>(
    f: &F,
    x0: &DVector<f64>,
    control: &PiecewiseConstant,
    t_f: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("step size must be positive".into()));
    }
    let n = steps_in(t_f, dt, "horizon")?;
    let per_segment = if control.period.is_finite() {
        Some(steps_in(control.period, dt, "control segment")?)
    } else {
        None
    };
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..n {
        let seg = per_segment.map_or(0, |s| (k / s).min(control.values.len() - 1));
        x = rk4_step(f, &x, &control.values[seg], dt)?;
        times.push((k + 1) as f64 * dt);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states })
}
