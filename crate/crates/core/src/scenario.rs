//! Scenario files: one versioned JSON document per run.
//!
//! Quantities are SI. A key may instead carry a unit suffix, converted on
//! load: `_deg` (degrees to radians), `_km` (kilometres to metres) and `_mw`
//! (MW/m² to W/m²). `"heading_deg": 90` and `"heading": 1.5707963267948966`
//! are the same input; giving both is an error. The resolved echo written
//! next to the outputs is always SI.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dynamics::{EntryModel, EntryState, Environment, VehicleParams};
use crate::error::{Error, Result};
use crate::mpc::{MpcConfig, PlantModel};
use crate::reach::{ReachConfig, StateConstraint};
use crate::setalg::{ConstrainedZonotope, IntervalBox, Zonotope};
use crate::thermal::ThermalParams;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;
/// File name of the resolved configuration echo.
pub const ECHO_FILE: &str = "scenario.resolved.json";

const SUFFIXES: [(&str, f64); 3] = [
    ("_deg", std::f64::consts::PI / 180.0),
    ("_km", 1e3),
    ("_mw", 1e6),
];

/// One value per state, by name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateValues {
    pub altitude: f64,
    pub velocity: f64,
    pub flight_path_angle: f64,
    pub latitude: f64,
    pub heading: f64,
    pub longitude: f64,
}

impl StateValues {
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.to_state().to_vector().as_slice())
    }

    pub fn to_state(&self) -> EntryState {
        EntryState {
            altitude: self.altitude,
            velocity: self.velocity,
            flight_path_angle: self.flight_path_angle,
            latitude: self.latitude,
            heading: self.heading,
            longitude: self.longitude,
        }
    }

    fn from_slice(v: &[f64]) -> Self {
        StateValues {
            altitude: v[0],
            velocity: v[1],
            flight_path_angle: v[2],
            latitude: v[3],
            heading: v[4],
            longitude: v[5],
        }
    }
}

fn default_half_widths() -> StateValues {
    StateValues::from_slice(&[
        500.0,
        50.0,
        0.05f64.to_radians(),
        0.01f64.to_radians(),
        0.1f64.to_radians(),
        0.01f64.to_radians(),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSetSpec {
    pub center: StateValues,
    #[serde(default = "default_half_widths")]
    pub half_widths: StateValues,
}

/// Closed intervals `[lo, hi]` for α and β.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBounds {
    pub angle_of_attack: [f64; 2],
    pub bank_angle: [f64; 2],
}

fn default_substeps() -> usize {
    1
}
fn default_max_splits() -> usize {
    8
}
fn default_max_order() -> f64 {
    20.0
}
fn default_tolerance_fraction() -> f64 {
    crate::reach::DEFAULT_TOLERANCE_FRACTION
}
fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReachSettings {
    pub time_step: f64,
    pub horizon: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "default_max_splits")]
    pub max_splits: usize,
    #[serde(default = "default_max_order")]
    pub max_order: f64,
    /// Per-state error tolerance; when absent, `error_tolerance_fraction`
    /// of the initial set's full widths.
    #[serde(default)]
    pub error_tolerance: Option<StateValues>,
    #[serde(default = "default_tolerance_fraction")]
    pub error_tolerance_fraction: f64,
    #[serde(default = "default_one")]
    pub curvature_margin: f64,
}

fn default_mpc_horizon() -> usize {
    20
}
fn default_q_diag() -> Vec<f64> {
    vec![100.0; 6]
}
fn default_r_diag() -> Vec<f64> {
    vec![1.0; 2]
}
fn default_du_max() -> Option<[f64; 2]> {
    Some([1f64.to_radians(); 2])
}
fn default_plant() -> PlantModel {
    PlantModel::Rk4
}
fn default_trust_radius() -> f64 {
    0.2
}
fn default_max_iterations() -> usize {
    25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSettings {
    #[serde(rename = "N", default = "default_mpc_horizon")]
    pub horizon: usize,
    #[serde(rename = "Ts")]
    pub sampling_time: f64,
    /// Closed-loop run length; the reach horizon when absent.
    #[serde(default)]
    pub duration: Option<f64>,
    #[serde(rename = "Q_diag", default = "default_q_diag")]
    pub q_diag: Vec<f64>,
    #[serde(rename = "R_diag", default = "default_r_diag")]
    pub r_diag: Vec<f64>,
    /// Largest input change per sample; `null` disables the limit.
    #[serde(default = "default_du_max")]
    pub du_max: Option<[f64; 2]>,
    #[serde(default = "default_plant")]
    pub plant: PlantModel,
    #[serde(default = "default_trust_radius")]
    pub trust_radius: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_samples() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSettings {
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        MonteCarloSettings {
            samples: default_samples(),
        }
    }
}

/// Plot window and grid of the heat-limit curve, in m/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatSettings {
    pub velocity_range: [f64; 2],
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
}

fn default_curve_points() -> usize {
    200
}

fn default_seed() -> u64 {
    42
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub environment: Environment,
    pub initial_set: InitialSetSpec,
    pub controls: ControlBounds,
    pub reach: ReachSettings,
    #[serde(default)]
    pub thermal: ThermalParams,
    /// Intersect each step with the heat-rate halfspace.
    #[serde(default)]
    pub heat_constraint: bool,
    #[serde(default)]
    pub mpc: Option<MpcSettings>,
    #[serde(default)]
    pub monte_carlo: MonteCarloSettings,
    #[serde(default)]
    pub heat: Option<HeatSettings>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// Rewrites unit-suffixed keys to SI, recursively.
fn normalize_units(value: Value, path: &str) -> Result<Value> {
    match value {
        Value::Object(map) => {
            let mut out = Map::new();
            for (key, v) in map {
                let here = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                let (name, factor) = match SUFFIXES.iter().find(|(s, _)| key.ends_with(s)) {
                    Some((s, f)) => (key[..key.len() - s.len()].to_string(), Some(*f)),
                    None => (key.clone(), None),
                };
                let v = match factor {
                    Some(f) => scale_numbers(v, f, &here)?,
                    None => normalize_units(v, &here)?,
                };
                if out.contains_key(&name) {
                    return Err(Error::scenario(
                        &here,
                        format!("`{name}` is given twice (with and without a unit suffix)"),
                    ));
                }
                out.insert(name, v);
            }
            Ok(Value::Object(out))
        }
        other => Ok(other),
    }
}

fn scale_numbers(value: Value, factor: f64, path: &str) -> Result<Value> {
    match value {
        Value::Number(n) => {
            let x = n
                .as_f64()
                .ok_or_else(|| Error::scenario(path, "not a finite number"))?;
            serde_json::Number::from_f64(x * factor)
                .map(Value::Number)
                .ok_or_else(|| Error::scenario(path, "value overflows after unit conversion"))
        }
        Value::Array(items) => items
            .into_iter()
            .enumerate()
            .map(|(i, v)| scale_numbers(v, factor, &format!("{path}[{i}]")))
            .collect::<Result<Vec<_>>>()
            .map(Value::Array),
        Value::Null => Ok(Value::Null),
        _ => Err(Error::scenario(
            path,
            "unit-suffixed keys take numbers or arrays of numbers",
        )),
    }
}

fn check_interval(field: &str, iv: [f64; 2]) -> Result<()> {
    if !(iv[0].is_finite() && iv[1].is_finite() && iv[0] <= iv[1]) {
        return Err(Error::scenario(
            field,
            "expected a finite interval [lo, hi] with lo ≤ hi",
        ));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text)?;
        let version = raw.get("schema_version").and_then(Value::as_u64);
        match version {
            Some(v) if v == SCENARIO_SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::scenario(
                    "schema_version",
                    format!("unsupported version {v} (expected {SCENARIO_SCHEMA_VERSION})"),
                ))
            }
            None => {
                return Err(Error::scenario(
                    "schema_version",
                    "missing or not an integer",
                ))
            }
        }
        let normalized = normalize_units(raw, "")?;
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(normalized).map_err(|e| {
            let path = e.path().to_string();
            Error::scenario(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |field: &'static str| move |e: Error| Error::scenario(field, e.to_string());
        self.vehicle.validate().map_err(wrap("vehicle"))?;
        self.environment.validate().map_err(wrap("environment"))?;
        self.thermal.validate().map_err(wrap("thermal"))?;
        let c = self.initial_set.center.to_vector();
        let w = self.initial_set.half_widths.to_vector();
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::scenario(
                "initial_set.center",
                "values must be finite",
            ));
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::scenario(
                "initial_set.half_widths",
                "values must be finite and ≥ 0",
            ));
        }
        check_interval("controls.angle_of_attack", self.controls.angle_of_attack)?;
        check_interval("controls.bank_angle", self.controls.bank_angle)?;
        if !(self.reach.error_tolerance_fraction > 0.0) {
            return Err(Error::scenario(
                "reach.error_tolerance_fraction",
                "must be positive",
            ));
        }
        self.reach_config()?.validate().map_err(wrap("reach"))?;
        if let Some(m) = &self.mpc {
            if m.q_diag.len() != 6 {
                return Err(Error::scenario("mpc.Q_diag", "expected 6 entries"));
            }
            if m.r_diag.len() != 2 {
                return Err(Error::scenario("mpc.R_diag", "expected 2 entries"));
            }
            if let Some(d) = m.duration {
                if !(d > 0.0) {
                    return Err(Error::scenario("mpc.duration", "must be positive"));
                }
            }
            if let Some(du) = m.du_max {
                if du.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::scenario("mpc.du_max", "rate bounds must be ≥ 0"));
                }
            }
            self.mpc_config().unwrap().validate().map_err(wrap("mpc"))?;
        }
        if let Some(h) = &self.heat {
            check_interval("heat.velocity_range", h.velocity_range)?;
            if !(h.velocity_range[0] > 0.0) || h.curve_points < 2 {
                return Err(Error::scenario(
                    "heat",
                    "velocity range must be positive and the curve needs at least 2 points",
                ));
            }
        }
        if self.monte_carlo.samples == 0 {
            return Err(Error::scenario(
                "monte_carlo.samples",
                "at least one sample is required",
            ));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<EntryModel> {
        EntryModel::new(self.vehicle, self.environment)
    }

    pub fn initial_set(&self) -> Result<ConstrainedZonotope> {
        let z = Zonotope::from_half_widths(
            self.initial_set.center.to_vector(),
            &self.initial_set.half_widths.to_vector(),
        )?;
        Ok(z.into())
    }

    pub fn input_bounds(&self) -> Result<IntervalBox> {
        let c = &self.controls;
        IntervalBox::new(
            DVector::from_vec(vec![c.angle_of_attack[0], c.bank_angle[0]]),
            DVector::from_vec(vec![c.angle_of_attack[1], c.bank_angle[1]]),
        )
    }

    pub fn input_set(&self) -> Result<Zonotope> {
        Ok(Zonotope::from_box(&self.input_bounds()?))
    }

    /// Per-state tolerance actually used by the reach engine.
    pub fn error_tolerance(&self) -> Vec<f64> {
        match &self.reach.error_tolerance {
            Some(t) => t.to_vector().iter().copied().collect(),
            None => {
                let f = self.reach.error_tolerance_fraction;
                let w = self.initial_set.half_widths.to_vector();
                // Axes of zero width get no limit.
                w.iter()
                    .map(|hw| {
                        if *hw > 0.0 {
                            2.0 * hw * f
                        } else {
                            f64::INFINITY
                        }
                    })
                    .collect()
            }
        }
    }

    pub fn reach_config(&self) -> Result<ReachConfig> {
        let mut cfg = ReachConfig::new(self.reach.time_step, self.reach.horizon, self.input_set()?);
        cfg.substeps = self.reach.substeps;
        cfg.max_splits = self.reach.max_splits;
        cfg.max_zonotope_order = self.reach.max_order;
        cfg.curvature_margin = self.reach.curvature_margin;
        cfg.error_tolerance = Some(self.error_tolerance());
        Ok(cfg)
    }

    /// The heat halfspace when the scenario asks for it.
    pub fn state_constraints(&self) -> Vec<StateConstraint> {
        if self.heat_constraint {
            vec![StateConstraint::HeatLimit {
                params: self.thermal,
                env: self.environment,
            }]
        } else {
            vec![]
        }
    }

    pub fn mpc_config(&self) -> Option<MpcConfig> {
        let m = self.mpc.as_ref()?;
        let mut cfg = MpcConfig::new(6, 2, m.sampling_time);
        cfg.horizon = m.horizon;
        cfg.state_weights = DMatrix::from_diagonal(&DVector::from_column_slice(&m.q_diag));
        cfg.input_weights = DMatrix::from_diagonal(&DVector::from_column_slice(&m.r_diag));
        cfg.rate_bounds = m.du_max.map(|d| DVector::from_column_slice(&d));
        cfg.plant = m.plant;
        cfg.trust_radius = m.trust_radius;
        cfg.max_iterations = m.max_iterations;
        Some(cfg)
    }

    pub fn mpc_duration(&self) -> f64 {
        self.mpc
            .as_ref()
            .and_then(|m| m.duration)
            .unwrap_or(self.reach.horizon)
    }

    /// Writes the resolved configuration into `dir`.
    pub fn write_echo(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(ECHO_FILE);
        fs::write(&path, self.to_json()?)?;
        Ok(path)
    }
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::scenario("<file>", format!("cannot read {}: {e}", path.display())))?;
    ScenarioConfig::from_json_str(&text)
}
