//! Receding-horizon tracking of a reference while staying inside a
//! reachable tube.

mod closed_loop;
mod config;
mod ocp;
pub(crate) mod qp;
mod reference;
mod schedule;

pub use closed_loop::{mpc_loop, ClosedLoop, LoopRecord, LoopStatus, PLANT_SUBSTEPS};
pub use config::{MpcConfig, PlantModel};
pub use ocp::{solve_ocp, tracking_cost, ActiveConstraints, MpcSolution, OcpProblem, SolveStatus};
pub use reference::{reference_from_tube, tube_center, ReferenceTrajectory};
pub use schedule::{tube_membership_constraints, BranchPath, MembershipBlock, TubeSchedule};
