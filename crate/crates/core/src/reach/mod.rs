//! Conservative reachable tubes of a nonlinear [`VectorField`]: each step
//! linearizes about the current set, propagates the affine model exactly,
//! adds a box bounding the Lagrange remainder, intersects the state
//! constraints and reduces the representation.
//!
//! [`VectorField`]: crate::dynamics::VectorField

mod series;
mod step;
mod tube;

pub use step::{a_priori_enclosure, error_set, lin_reach_step, linearize_at, LinearizedStep};
pub use tube::{
    choose_split_axis, reach, Branch, ReachConfig, ReachStep, ReachTube, StateConstraint,
    DEFAULT_TOLERANCE_FRACTION,
};
