//! The 3-DOF entry vehicle over a spherical, non-rotating planet.

mod field;
mod integrate;
mod model;
mod vehicle;

pub use field::{VectorField, MAX_VARS};
pub use integrate::{integrate_rk4, rk4_step, step_euler, PiecewiseConstant, Trajectory};
pub use model::{eom, hessian_abs_max, jacobian, EntryModel, MIN_COS, MIN_SPEED};
pub use vehicle::{
    aero_forces, density, entry_rates, gravity, ControlInput, EntryState, Environment,
    VehicleParams,
};
