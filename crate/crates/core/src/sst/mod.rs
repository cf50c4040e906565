//! Stable Sparse RRT: an anytime kinodynamic planner that keeps the tree sparse
//! through witness-based pruning.

mod index;
mod metric;
mod tree;

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cost::{CostModel, CostWeights};
use crate::error::PlanError;
use crate::geometry::Point2;
use crate::objects::WorldModel;
use crate::road::{in_goal, GoalRegion, PenaltyGrid};
use crate::vehicle::{
    step, steps_per_propagation, ControlInput, TimedState, Trajectory, VehicleParams, VehicleState,
};

pub use metric::{planner_metric, MetricKind, StateMetric};
pub use tree::{
    extract_best_trajectory, Insertion, NodeId, PlannerTree, TreeNode, TreeStats, Witness,
};

/// Query budget; exactly one limit applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Wall-clock seconds.
    Time(f64),
    /// Planner iterations; seeding charges one per propagated candidate.
    Iterations(u64),
}

impl Budget {
    fn validate(&self) -> Result<(), String> {
        match *self {
            Budget::Time(s) if !(s >= 0.0 && s.is_finite()) => Err(format!(
                "time budget must be finite and non-negative, got {s}"
            )),
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for Budget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Budget::Time(s) => write!(f, "time:{s}"),
            Budget::Iterations(n) => write!(f, "iters:{n}"),
        }
    }
}

impl std::str::FromStr for Budget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| format!("expected time:SECS or iters:N, got `{s}`"))?;
        match kind {
            "time" => value
                .parse::<f64>()
                .map(Budget::Time)
                .map_err(|e| format!("bad seconds `{value}`: {e}")),
            "iters" | "iterations" => value
                .parse::<u64>()
                .map(Budget::Iterations)
                .map_err(|e| format!("bad iteration count `{value}`: {e}")),
            _ => Err(format!("unknown budget kind `{kind}`")),
        }
    }
}

/// Per-scenario planner tuning, independent of the query geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerSettings {
    pub budget: Budget,
    pub near_distance: f64,
    pub prune_distance: f64,
    pub propagation_time: f64,
    pub integration_step: f64,
    pub accel_std: f64,
    pub steer_std: f64,
    /// Padding around the ego position and goal region for the sampling rectangle, in m.
    pub sampling_margin: f64,
    pub metric: MetricKind,
    /// Spatial bucket edge in metric units; defaults to five near radii.
    pub index_cell: Option<f64>,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            budget: Budget::Time(0.3),
            near_distance: 0.2,
            prune_distance: 0.1,
            propagation_time: 0.4,
            integration_step: 0.04,
            accel_std: 0.8,
            steer_std: 0.2,
            sampling_margin: 15.0,
            metric: MetricKind::Unit,
            index_cell: None,
        }
    }
}

impl PlannerSettings {
    pub fn validate(&self) -> Result<(), String> {
        self.budget.validate()?;
        if !(self.near_distance > 0.0 && self.prune_distance > 0.0) {
            return Err("near and prune distances must be positive".into());
        }
        if self.prune_distance > self.near_distance {
            return Err(format!(
                "prune distance {} exceeds near distance {}",
                self.prune_distance, self.near_distance
            ));
        }
        steps_per_propagation(self.propagation_time, self.integration_step)
            .map_err(|e| e.to_string())?;
        if !(self.accel_std > 0.0 && self.steer_std > 0.0) {
            return Err("input standard deviations must be positive".into());
        }
        if !(self.sampling_margin >= 0.0) {
            return Err("sampling margin must be non-negative".into());
        }
        if let Some(c) = self.index_cell {
            if !(c > 0.0) {
                return Err("index cell must be positive".into());
            }
        }
        Ok(())
    }

    pub fn index_cell(&self) -> f64 {
        self.index_cell.unwrap_or(5.0 * self.near_distance)
    }
}

/// Box over which states are sampled and outside which they are invalid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingBounds {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub theta: [f64; 2],
    pub v: [f64; 2],
}

impl SamplingBounds {
    /// Rectangle covering `ego` and the goal region, padded by `margin`.
    pub fn around(ego: &Point2, goal: &GoalRegion, margin: f64, speed_bounds: [f64; 2]) -> Self {
        let (lo, hi) = goal.bounding_box();
        Self {
            x: [ego.x.min(lo.x) - margin, ego.x.max(hi.x) + margin],
            y: [ego.y.min(lo.y) - margin, ego.y.max(hi.y) + margin],
            theta: [-PI, PI],
            v: speed_bounds,
        }
    }

    pub fn contains(&self, s: &VehicleState) -> bool {
        let inside = |v: f64, r: [f64; 2]| v >= r[0] && v <= r[1];
        inside(s.x, self.x)
            && inside(s.y, self.y)
            && inside(s.theta, self.theta)
            && inside(s.v, self.v)
    }

    fn validate(&self) -> Result<(), String> {
        let ordered = |r: [f64; 2], strict: bool| {
            r[0].is_finite() && r[1].is_finite() && if strict { r[0] < r[1] } else { r[0] <= r[1] }
        };
        if !(ordered(self.x, true) && ordered(self.y, true) && ordered(self.theta, true)) {
            return Err("sampling bounds must be finite with positive extent".into());
        }
        if !ordered(self.v, false) {
            return Err("speed sampling bounds must be ordered".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub settings: PlannerSettings,
    pub bounds: SamplingBounds,
    pub seed: u64,
}

impl PlannerConfig {
    pub fn validate(&self, params: &VehicleParams) -> Result<(), PlanError> {
        self.settings.validate().map_err(PlanError::Config)?;
        self.bounds.validate().map_err(PlanError::Config)?;
        let contains_zero = |b: [f64; 2]| b[0] <= 0.0 && b[1] >= 0.0;
        if !(contains_zero(params.accel_bounds) && contains_zero(params.steer_bounds)) {
            return Err(PlanError::Config("input bounds must contain zero".into()));
        }
        Ok(())
    }

    pub fn metric(&self) -> StateMetric {
        StateMetric::new(self.settings.metric, &self.bounds)
    }
}

/// Uniform draw from the sampling box.
pub fn sample_state<R: Rng + ?Sized>(config: &PlannerConfig, rng: &mut R) -> VehicleState {
    let b = &config.bounds;
    VehicleState {
        x: rng.random_range(b.x[0]..b.x[1]),
        y: rng.random_range(b.y[0]..b.y[1]),
        theta: rng.random_range(b.theta[0]..b.theta[1]),
        v: rng.random_range(b.v[0]..=b.v[1]),
    }
}

/// Zero-mean Gaussian inputs, redrawn jointly until both lie within the input bounds.
pub fn sample_input<R: Rng + ?Sized>(
    config: &PlannerConfig,
    rng: &mut R,
    params: &VehicleParams,
) -> ControlInput {
    let accel = Normal::new(0.0, config.settings.accel_std).expect("validated std");
    let steer = Normal::new(0.0, config.settings.steer_std).expect("validated std");
    loop {
        let u = ControlInput::new(accel.sample(rng), steer.sample(rng));
        if params.input_within_bounds(&u) {
            return u;
        }
    }
}

pub fn is_state_valid(
    s: &VehicleState,
    t: f64,
    grid: &PenaltyGrid,
    world: &WorldModel,
    config: &PlannerConfig,
    params: &VehicleParams,
) -> bool {
    config.bounds.contains(s)
        && !grid.is_lane_invalid(s.x, s.y)
        && (world.is_empty() || !world.collides(&s.footprint(params), t))
}

/// Everything a query reads besides the start state and planner configuration.
#[derive(Debug, Clone, Copy)]
pub struct PlanningProblem<'a> {
    pub goal: &'a GoalRegion,
    pub grid: &'a PenaltyGrid,
    pub world: &'a WorldModel,
    pub params: &'a VehicleParams,
    pub weights: &'a CostWeights,
}

impl PlanningProblem<'_> {
    pub fn is_valid(&self, s: &VehicleState, t: f64, config: &PlannerConfig) -> bool {
        is_state_valid(s, t, self.grid, self.world, config, self.params)
    }
}

/// Best-solution cost after a given number of charged iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCheckpoint {
    pub iteration: u64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// Root to the cheapest goal node; `None` when unsolved.
    pub trajectory: Option<Trajectory>,
    pub cost: Option<f64>,
    pub solved: bool,
    pub iterations: u64,
    pub wall_time: f64,
    pub stats: TreeStats,
    pub seeded_nodes: usize,
    pub improvements: Vec<CostCheckpoint>,
}

/// Result of growing one edge from a tree node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    Invalid,
    Inserted(Insertion),
}

struct BudgetClock {
    started: Instant,
    budget: Budget,
    used: u64,
}

impl BudgetClock {
    fn exhausted(&self) -> bool {
        match self.budget {
            Budget::Iterations(n) => self.used >= n,
            Budget::Time(s) => self.started.elapsed().as_secs_f64() >= s,
        }
    }
}

/// A single planning query. Seeding strategies drive it through the public
/// extension methods before [`Planner::run`] spends the remaining budget.
pub struct Planner<'a> {
    problem: PlanningProblem<'a>,
    config: &'a PlannerConfig,
    costs: CostModel<'a>,
    tree: PlannerTree,
    rng: ChaCha8Rng,
    clock: BudgetClock,
    steps: usize,
    step: f64,
    seeded: usize,
    improvements: Vec<CostCheckpoint>,
}

impl<'a> Planner<'a> {
    pub fn new(
        start: VehicleState,
        start_time: f64,
        problem: PlanningProblem<'a>,
        config: &'a PlannerConfig,
    ) -> Result<Self, PlanError> {
        let started = Instant::now();
        config.validate(problem.params)?;
        if !start.is_finite() || !problem.is_valid(&start, start_time, config) {
            return Err(PlanError::InvalidStart);
        }
        let s = &config.settings;
        let steps = steps_per_propagation(s.propagation_time, s.integration_step)?;
        let costs = CostModel::new(problem.grid, problem.world, problem.weights);
        let root = TimedState::root(start, start_time);
        let tree = PlannerTree::new(
            root,
            costs.weighted_state_cost(&root),
            in_goal(problem.goal, &start),
            config.metric(),
            &config.bounds,
            s.near_distance,
            s.prune_distance,
            s.index_cell(),
            s.integration_step,
        );
        let mut planner = Self {
            problem,
            config,
            costs,
            tree,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            clock: BudgetClock {
                started,
                budget: s.budget,
                used: 0,
            },
            steps,
            step: s.integration_step,
            seeded: 0,
            improvements: Vec::new(),
        };
        planner.record_improvement();
        Ok(planner)
    }

    pub fn tree(&self) -> &PlannerTree {
        &self.tree
    }

    pub fn problem(&self) -> &PlanningProblem<'a> {
        &self.problem
    }

    pub fn config(&self) -> &PlannerConfig {
        self.config
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn iterations(&self) -> u64 {
        self.clock.used
    }

    pub fn budget_exhausted(&self) -> bool {
        self.clock.exhausted()
    }

    /// Counts work done outside the main loop against the budget.
    pub fn charge(&mut self, iterations: u64) {
        self.clock.used += iterations;
    }

    pub fn sample_input(&mut self) -> ControlInput {
        sample_input(self.config, &mut self.rng, self.problem.params)
    }

    pub fn is_valid(&self, s: &VehicleState, t: f64) -> bool {
        self.problem.is_valid(s, t, self.config)
    }

    /// Endpoint of applying `u` from node `from` for one propagation, if every
    /// integration substate is valid at its own timestamp.
    pub fn propagate_valid(&mut self, from: NodeId, u: &ControlInput) -> Option<TimedState> {
        let origin = self.tree.node(from).state;
        let mut cur = origin.state;
        for k in 1..=self.steps {
            cur = step(&cur, u, self.step, self.problem.params);
            if !self.is_valid(&cur, origin.t + k as f64 * self.step) {
                return None;
            }
        }
        Some(TimedState {
            state: cur,
            t: origin.t + self.steps as f64 * self.step,
            input: Some(*u),
        })
    }

    /// Like [`Planner::propagate_valid`] for an arbitrary positive duration; a
    /// trailing partial step is integrated the way [`Trajectory::state_at`] does.
    pub fn propagate_valid_for(
        &mut self,
        from: NodeId,
        u: &ControlInput,
        duration: f64,
    ) -> Option<TimedState> {
        let origin = self.tree.node(from).state;
        let full = ((duration / self.step) + 1e-9).floor() as usize;
        let rest = duration - full as f64 * self.step;
        let mut cur = origin.state;
        for k in 1..=full {
            cur = step(&cur, u, self.step, self.problem.params);
            if !self.is_valid(&cur, origin.t + k as f64 * self.step) {
                return None;
            }
        }
        if rest > 1e-12 {
            cur = step(&cur, u, rest, self.problem.params);
            if !self.is_valid(&cur, origin.t + duration) {
                return None;
            }
        }
        Some(TimedState {
            state: cur,
            t: origin.t + duration,
            input: Some(*u),
        })
    }

    /// Offers `state` as a child of `parent` to the witness set.
    pub fn insert(&mut self, parent: NodeId, state: TimedState) -> Insertion {
        let p = self.tree.node(parent);
        let (p_state, p_state_cost, p_cost) = (p.state, p.state_cost, p.cost);
        let state_cost = self.costs.weighted_state_cost(&state);
        let cost = p_cost
            + self
                .costs
                .edge_cost(&p_state, p_state_cost, &state, state_cost);
        let goal = in_goal(self.problem.goal, &state.state);
        let outcome = self.tree.insert(parent, state, state_cost, cost, goal);
        if goal {
            self.record_improvement();
        }
        outcome
    }

    /// Seeding entry point: same as [`Planner::insert`] but counted as seeded.
    pub fn insert_seeded(&mut self, parent: NodeId, state: TimedState) -> Insertion {
        let outcome = self.insert(parent, state);
        if matches!(outcome, Insertion::Added(_)) {
            self.seeded += 1;
        }
        outcome
    }

    pub fn extend(&mut self, from: NodeId, u: &ControlInput) -> Extension {
        match self.propagate_valid(from, u) {
            Some(end) => Extension::Inserted(self.insert(from, end)),
            None => Extension::Invalid,
        }
    }

    fn record_improvement(&mut self) {
        if let Some(cost) = self.tree.best_cost() {
            if self.improvements.last().is_none_or(|c| cost < c.cost) {
                self.improvements.push(CostCheckpoint {
                    iteration: self.clock.used,
                    cost,
                });
            }
        }
    }

    /// One sample-select-propagate-prune iteration.
    pub fn iterate(&mut self) -> Extension {
        self.clock.used += 1;
        let x_rand = sample_state(self.config, &mut self.rng);
        let from = self
            .tree
            .select_node(&x_rand)
            .expect("the root is never deactivated");
        let u = self.sample_input();
        self.extend(from, &u)
    }

    /// Spends the remaining budget and returns the best solution.
    pub fn run(mut self) -> PlanResult {
        while !self.clock.exhausted() {
            self.iterate();
        }
        self.finish()
    }

    pub fn finish(self) -> PlanResult {
        let trajectory = self.tree.best_goal().map(|id| self.tree.trajectory_to(id));
        PlanResult {
            solved: trajectory.is_some(),
            cost: self.tree.best_cost(),
            trajectory,
            iterations: self.clock.used,
            wall_time: self.clock.started.elapsed().as_secs_f64(),
            stats: self.tree.stats(),
            seeded_nodes: self.seeded,
            improvements: self.improvements,
        }
    }
}

/// Base SST query from `start` at absolute time `start_time`.
pub fn plan(
    start: VehicleState,
    start_time: f64,
    problem: PlanningProblem<'_>,
    config: &PlannerConfig,
) -> Result<PlanResult, PlanError> {
    Ok(Planner::new(start, start_time, problem, config)?.run())
}
