//! Deterministic closed-loop simulation: replan at a fixed rate, execute the
//! planned inputs open loop on the kinematic plant, monitor collisions.

mod metrics;
mod scenario;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dki::plan_dki;
use crate::error::{PlanError, RoadError, SimError};
use crate::road::{compute_goal_region, GoalRegion};
use crate::sst::{plan, PlanResult, PlannerConfig, PlanningProblem, SamplingBounds, TreeStats};
use crate::vehicle::{step, ControlInput, TimedState, Trajectory, VehicleParams, VehicleState};

pub use metrics::{compute_metrics, gain_percent, MetricsReport};
pub use scenario::{
    apply_override, load_scenario, load_scenario_with_overrides, parse_scenario, Averaging,
    EgoSection, Environment, GridSettings, ObjectSpec, RoadSection, Scenario, SimSettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerMode {
    Base,
    Dki,
}

impl std::fmt::Display for PlannerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PlannerMode::Base => "base",
            PlannerMode::Dki => "dki",
        })
    }
}

impl std::str::FromStr for PlannerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(PlannerMode::Base),
            "dki" => Ok(PlannerMode::Dki),
            _ => Err(format!("unknown mode `{s}`, expected base or dki")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Duration,
    RouteCompleted,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub t: f64,
    pub object: String,
}

/// Compact view of one planning query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub solved: bool,
    pub cost: Option<f64>,
    pub iterations: u64,
    pub wall_time: f64,
    pub stats: TreeStats,
    pub seeded_nodes: usize,
    pub error: Option<String>,
}

impl PlanSummary {
    fn from_result(r: &PlanResult) -> Self {
        Self {
            solved: r.solved,
            cost: r.cost,
            iterations: r.iterations,
            wall_time: r.wall_time,
            stats: r.stats,
            seeded_nodes: r.seeded_nodes,
            error: None,
        }
    }

    fn failed(error: String) -> Self {
        Self {
            solved: false,
            cost: None,
            iterations: 0,
            wall_time: 0.0,
            stats: TreeStats::default(),
            seeded_nodes: 0,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    /// Ego state reached at the start of the tick.
    pub ego: TimedState,
    /// First commanded input of the executed plan.
    pub command: ControlInput,
    pub fallback: bool,
    pub plan: PlanSummary,
    pub planned: Option<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub scenario: String,
    pub mode: PlannerMode,
    pub seed: u64,
    pub ticks: Vec<TickRecord>,
    /// Every integration substate the plant passed through, starting at the initial state.
    pub executed: Vec<TimedState>,
    pub collisions: Vec<CollisionEvent>,
    /// Executed substates whose penalty-grid cell marks them invalid.
    pub lane_invalid_states: usize,
    pub termination: Termination,
}

/// Plant states over `[t0, t0 + dt]`. While `traj` lasts the plant visits the
/// trajectory's own integration substates (the states the planner validated),
/// then the tick endpoint; afterwards it steps `tail` at `ts`.
fn execute(
    start: &VehicleState,
    t0: f64,
    dt: f64,
    traj: Option<&Trajectory>,
    tail: ControlInput,
    ts: f64,
    params: &VehicleParams,
) -> Vec<TimedState> {
    const EPS: f64 = 1e-9;
    let t1 = t0 + dt;
    let mut out = Vec::new();
    let mut cur = *start;
    let mut prev_t = t0;
    if let Some(traj) = traj {
        for pair in traj.samples.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.t <= t0 + EPS {
                continue;
            }
            if a.t >= t1 - EPS {
                break;
            }
            let u = b.input.unwrap_or(ControlInput::ZERO);
            let mut s = a.state;
            let mut t = a.t;
            while t < b.t - EPS && t < t1 - EPS {
                let h = ts.min(b.t - t).min(t1 - t);
                // land exactly on the knot when the remainder is rounding noise
                let h = if b.t - (t + h) < EPS { b.t - t } else { h };
                s = step(&s, &u, h, params);
                t += h;
                if t > t0 + EPS {
                    out.push(TimedState {
                        state: s,
                        t,
                        input: None,
                    });
                }
            }
            if (t - b.t).abs() < EPS {
                s = b.state;
                if let Some(last) = out.last_mut() {
                    last.state = s;
                    last.t = b.t;
                }
            }
            cur = s;
            prev_t = t;
        }
    }
    while prev_t < t1 - EPS {
        let h = ts.min(t1 - prev_t);
        cur = step(&cur, &tail, h, params);
        prev_t += h;
        out.push(TimedState {
            state: cur,
            t: prev_t,
            input: None,
        });
    }
    if let Some(last) = out.last_mut() {
        last.t = t1;
    }
    out
}

/// Goal band and planner configuration for a query from `ego`.
pub fn query_setup(
    sc: &Scenario,
    env: &Environment,
    ego: &VehicleState,
    seed: u64,
) -> Result<(GoalRegion, PlannerConfig), SimError> {
    let goal = compute_goal_region(&env.net, ego, sc.sim.goal_distance, sc.sim.goal_threshold)?;
    let config = PlannerConfig {
        settings: sc.planner,
        bounds: SamplingBounds::around(
            &ego.position(),
            &goal,
            sc.planner.sampling_margin,
            sc.ego.params.speed_bounds,
        ),
        seed,
    };
    Ok((goal, config))
}

/// One planning query from `ego` at time `t`, with the goal band placed ahead on the route.
pub fn plan_query(
    sc: &Scenario,
    env: &Environment,
    ego: &VehicleState,
    t: f64,
    mode: PlannerMode,
    prev: Option<&Trajectory>,
    seed: u64,
) -> Result<PlanResult, SimError> {
    let params = sc.ego.params;
    let (goal, config) = query_setup(sc, env, ego, seed)?;
    let problem = PlanningProblem {
        goal: &goal,
        grid: &env.grid,
        world: &env.world,
        params: &params,
        weights: &sc.weights,
    };
    Ok(match mode {
        PlannerMode::Base => plan(*ego, t, problem, &config)?,
        PlannerMode::Dki => plan_dki(*ego, t, problem, &env.net, prev, &config, &sc.dki)?,
    })
}

/// Runs the scenario until its duration elapses, the route runs out, or the ego collides.
pub fn run_closed_loop(sc: &Scenario, mode: PlannerMode, seed: u64) -> Result<SimLog, SimError> {
    let env = sc.validate()?;
    run_with_environment(sc, &env, mode, seed)
}

pub fn run_with_environment(
    sc: &Scenario,
    env: &Environment,
    mode: PlannerMode,
    seed: u64,
) -> Result<SimLog, SimError> {
    let params = sc.ego.params;
    let dt = 1.0 / sc.sim.planning_rate;
    let ts = sc.planner.integration_step;
    let fallback_input = ControlInput::new(params.accel_bounds[0], 0.0);
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);

    let mut ego = sc.ego.state;
    let mut log = SimLog {
        scenario: sc.name.clone(),
        mode,
        seed,
        ticks: Vec::new(),
        executed: vec![TimedState::root(ego, 0.0)],
        collisions: Vec::new(),
        lane_invalid_states: 0,
        termination: Termination::Duration,
    };
    let check = |log: &mut SimLog, s: &TimedState| -> bool {
        if env.grid.is_lane_invalid(s.state.x, s.state.y) {
            log.lane_invalid_states += 1;
        }
        let footprint = s.state.footprint(&params);
        let hit =
            env.world.objects.iter().find(|o| {
                crate::geometry::boxes_overlap(&footprint, &o.prediction.footprint_at(s.t))
            });
        if let Some(o) = hit {
            log.collisions.push(CollisionEvent {
                t: s.t,
                object: o.prediction.id.clone(),
            });
            true
        } else {
            false
        }
    };
    if check(&mut log, &TimedState::root(ego, 0.0)) {
        log.termination = Termination::Collision;
        return Ok(log);
    }

    let mut prev: Option<Trajectory> = None;
    let mut tick = 0u64;
    loop {
        let t = tick as f64 * dt;
        if t >= sc.sim.duration - 1e-9 {
            break;
        }
        let tick_seed = seeds.next_u64();
        let outcome = plan_query(sc, env, &ego, t, mode, prev.as_ref(), tick_seed);
        let (summary, planned) = match outcome {
            Ok(r) => (PlanSummary::from_result(&r), r.trajectory),
            Err(SimError::Road(RoadError::RouteExhausted { .. })) => {
                log.termination = Termination::RouteCompleted;
                break;
            }
            Err(SimError::Plan(
                e @ (PlanError::InvalidStart | PlanError::EmptyTree | PlanError::NoGoalNode),
            )) => (PlanSummary::failed(e.to_string()), None),
            Err(e) => return Err(e),
        };
        let fallback = planned.is_none();
        let command = planned
            .as_ref()
            .and_then(|p| p.samples.get(1))
            .and_then(|s| s.input)
            .unwrap_or(fallback_input);
        let path = execute(&ego, t, dt, planned.as_ref(), fallback_input, ts, &params);
        log.ticks.push(TickRecord {
            t,
            ego: TimedState::root(ego, t),
            command,
            fallback,
            plan: summary,
            planned: planned.clone(),
        });
        let mut collided = false;
        for s in &path {
            if check(&mut log, s) {
                collided = true;
                break;
            }
            log.executed.push(*s);
        }
        if collided {
            log.termination = Termination::Collision;
            break;
        }
        ego = path.last().map_or(ego, |s| s.state);
        prev = planned;
        tick += 1;
    }
    Ok(log)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|c| c.to_string()).unwrap_or_default()
}

/// Per-tick table: t, x, y, theta, v, a_cmd, delta_cmd, solved, cost, fallback.
pub fn ticks_csv(log: &SimLog) -> String {
    let mut out = String::from("t,x,y,theta,v,a_cmd,delta_cmd,solved,cost,fallback\n");
    for r in &log.ticks {
        let s = &r.ego.state;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.t,
            s.x,
            s.y,
            s.theta,
            s.v,
            r.command.a,
            r.command.delta,
            r.plan.solved,
            fmt_opt(r.plan.cost),
            r.fallback
        ));
    }
    out
}

/// Executed plant states at integration-step resolution.
pub fn executed_csv(log: &SimLog) -> String {
    let mut out = String::from("t,x,y,theta,v\n");
    for s in &log.executed {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.t, s.state.x, s.state.y, s.state.theta, s.state.v
        ));
    }
    out
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,x,y,theta,v,a,delta\n");
    for s in &traj.samples {
        let u = s.input.unwrap_or(ControlInput::ZERO);
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.t, s.state.x, s.state.y, s.state.theta, s.state.v, u.a, u.delta
        ));
    }
    out
}

#[cfg(test)]
mod tests;
