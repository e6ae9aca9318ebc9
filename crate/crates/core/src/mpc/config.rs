use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the closed loop advances the true state between samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantModel {
    /// Same forward-Euler map the controller predicts with.
    Euler,
    /// RK4 with ten sub-steps per sample.
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub horizon: usize,
    pub sampling_time: f64,
    pub state_weights: DMatrix<f64>,
    pub input_weights: DMatrix<f64>,
    /// Largest `|u(t) − u(t−1)|` per sample, per input; `None` for no limit.
    pub rate_bounds: Option<DVector<f64>>,
    /// Largest trust-region step change of an input between iterates.
    pub trust_radius: f64,
    /// Converged when no input moves more than this between iterates.
    pub tol_stationarity: f64,
    pub tol_dynamics: f64,
    /// Allowed excess of the tube coefficient norm over 1.
    pub tol_constraint: f64,
    pub max_iterations: usize,
    pub plant: PlantModel,
}

impl MpcConfig {
    /// `N = 20`, `Q = 100·I`, `R = I`; rate limit 1° per sample.
    pub fn new(n: usize, m: usize, sampling_time: f64) -> Self {
        MpcConfig {
            horizon: 20,
            sampling_time,
            state_weights: DMatrix::identity(n, n) * 100.0,
            input_weights: DMatrix::identity(m, m),
            rate_bounds: Some(DVector::from_element(m, 1f64.to_radians())),
            trust_radius: 0.2,
            tol_stationarity: 1e-9,
            tol_dynamics: 1e-6,
            tol_constraint: 1e-6,
            max_iterations: 25,
            plant: PlantModel::Rk4,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_weights.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.input_weights.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.horizon == 0 {
            return bad("prediction horizon must be at least one step");
        }
        if !(self.sampling_time > 0.0) {
            return bad("sampling time must be positive");
        }
        for (name, w) in [
            ("state", &self.state_weights),
            ("input", &self.input_weights),
        ] {
            if !w.is_square() {
                return Err(Error::InvalidArgument(format!(
                    "{name} weights must be square"
                )));
            }
            if (w - w.transpose()).amax() > 1e-12 * w.amax().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} weights must be symmetric"
                )));
            }
            if w.clone().cholesky().is_none() {
                return Err(Error::InvalidArgument(format!(
                    "{name} weights must be positive definite"
                )));
            }
        }
        if let Some(r) = &self.rate_bounds {
            if r.len() != self.input_dim() {
                return Err(Error::dim("rate bounds", self.input_dim(), r.len()));
            }
            if r.iter().any(|v| !(*v >= 0.0)) {
                return bad("rate bounds must be nonnegative");
            }
        }
        if !(self.trust_radius > 0.0) {
            return bad("trust radius must be positive");
        }
        if !(self.tol_stationarity > 0.0 && self.tol_dynamics > 0.0 && self.tol_constraint >= 0.0) {
            return bad("solver tolerances must be positive");
        }
        if self.max_iterations == 0 {
            return bad("at least one solver iteration is required");
        }
        Ok(())
    }
}
