//! Kinodynamic trajectory planning for automated driving on structured roads.
//!
//! A Stable Sparse RRT planner over a kinematic bicycle model, optionally seeded
//! with a lane-following branch and a branch reused from the previous solution,
//! plus a deterministic closed-loop simulator for scenario benchmarks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod dki;
pub mod error;
pub mod geometry;
pub mod objects;
pub mod road;
pub mod sim;
pub mod sst;
pub mod vehicle;

#[cfg(test)]
pub(crate) mod testutil;

pub use cost::{motion_cost, trajectory_cost, CostModel, CostWeights};
pub use dki::{plan_dki, DkiConfig};
pub use error::{
    CostError, GeometryError, PlanError, RoadError, ScenarioError, SimError, VehicleError,
};
pub use geometry::{OrientedBox, Point2, Polygon};
pub use objects::{
    ObjectKind, ObjectPose, ObjectPrediction, RepulsiveField, WorldModel, WorldObject,
};
pub use road::{GoalRegion, Lane, PenaltyGrid, RoadNetwork};
pub use sim::{
    compute_metrics, gain_percent, load_scenario, load_scenario_with_overrides, plan_query,
    run_closed_loop, Environment, MetricsReport, PlannerMode, Scenario, SimLog, Termination,
};
pub use sst::{
    plan, Budget, PlanResult, PlannerConfig, PlannerSettings, PlanningProblem, SamplingBounds,
};
pub use vehicle::{ControlInput, TimedState, Trajectory, VehicleParams, VehicleState};
