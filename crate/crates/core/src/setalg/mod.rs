//! Generator-based convex sets: zonotopes, constrained zonotopes, and the
//! operations the reachability loop needs (affine maps, Minkowski sums,
//! halfspace intersection, order reduction, splitting, hulls).

mod conzono;
mod json;
mod lp;
mod polygon;
mod primitives;
mod zonotope;

pub use conzono::{ConstrainedZonotope, HullMethod, DEFAULT_XI_TOL};
pub use json::{SetDocument, SET_SCHEMA_VERSION};
pub use polygon::{polygon_area, project_vertices_2d, ProjectionOptions};
pub use primitives::{Halfspace, IntervalBox};
pub use zonotope::Zonotope;
