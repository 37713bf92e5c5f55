//! Reconfiguration planning for tile polyominoes moved one tile at a time
//! by a single robot walking on the structure.
//!
//! Real-valued quantities (center of mass, heuristic, sampling bias) are
//! generic over `num_traits::Float`; exact costs are integers. The aliases
//! below fix the scalar to `f64` for ordinary use.

pub mod fixtures;
pub mod grid;
pub mod harness;
pub mod mapfile;
pub mod matching;
pub mod planner;
pub mod rrt;

pub use grid::{Cell, Configuration, GridMap};
pub use mapfile::{Instance, MapFile};
pub use planner::{glc_solve, mwpm_expand_solve, Dropoff, LocalPlannerKind, RobotState};

/// Scalar used by the concrete aliases.
pub type Real = f64;
pub type PlannerParams = rrt::PlannerParams<Real>;
pub type Tree = rrt::Tree<Real>;
pub type TreeNode = rrt::TreeNode<Real>;
pub type PlannerParams32 = rrt::PlannerParams<f32>;
