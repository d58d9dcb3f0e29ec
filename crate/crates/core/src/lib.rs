//! Kinodynamic sampling-based motion planning with LQR steering and
//! control-barrier-function safety checks.
//!
//! The library grows an RRT* tree whose edges are produced by rolling out
//! infinite-horizon LQR feedback policies toward sampled local goals. Instead
//! of solving a QP per time step, each rollout step is checked against
//! higher-order CBF constraints and the trajectory is truncated at the first
//! violation. Rewiring uses the LQR stage cost as the tree metric, with a
//! hash-table gain cache to avoid recomputing Riccati solutions, and an
//! optional cross-entropy adaptive sampler focuses exploration once solutions
//! exist.

pub mod cbf;
pub mod dynamics;
pub mod lqr;
pub mod planner;
pub mod sampler;
pub mod steering;

pub use cbf::{CbfParams, CbfVerdict, ObstacleSpec, ZetaVariant};
pub use dynamics::{Control, Dynamics, State, Trajectory};
pub use lqr::{CostWeights, GainCache, LinearModel, RiccatiSolution};
pub use planner::{Planner, PlannerConfig, PlanResult, Tree, TreeNode};
pub use sampler::{Sampler, SamplerConfig};
pub use steering::{SteerConfig, SteerContext};
