//! Set-based safety analysis for hypersonic atmospheric re-entry.
//!
//! * [`setalg`]: zonotopes and constrained zonotopes.
//! * [`dynamics`]: the 3-DOF entry vehicle, its environment and derivatives.
//! * [`reach`]: conservative reachable tubes of the nonlinear dynamics.
//! * [`thermal`]: stagnation-point heating and the heat-rate constraint.
//! * [`mpc`]: receding-horizon tracking confined to a reachable tube.
//! * [`scenario`], [`montecarlo`], [`export`], [`runs`]: scenario files,
//!   the sampling soundness audit, exporters and end-to-end runs.

pub mod dynamics;
pub mod error;
pub mod export;
pub mod interval;
pub mod jet;
pub mod montecarlo;
pub mod mpc;
pub mod reach;
pub mod runs;
pub mod scalar;
pub mod scenario;
pub mod setalg;
pub mod thermal;

pub use error::{Error, Result};
pub use interval::Interval;
pub use setalg::{ConstrainedZonotope, Halfspace, IntervalBox, Zonotope};

pub use dynamics::{ControlInput, EntryState, Environment, VehicleParams};
pub use mpc::{MpcConfig, MpcSolution, ReferenceTrajectory};
pub use reach::{ReachConfig, ReachTube};
pub use scenario::ScenarioConfig;
pub use thermal::ThermalParams;
