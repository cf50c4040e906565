//! Domain-knowledge seeding: a lane-following branch and a branch reused from the
//! previous solution are grown into the tree before the regular sampling loop.

use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::road::RoadNetwork;
use crate::sst::{Insertion, NodeId, PlanResult, Planner, PlannerConfig, PlanningProblem};
use crate::vehicle::{step, ControlInput, TimedState, Trajectory, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DkiConfig {
    /// Lane-center target distance ahead of the branch tip, in m.
    pub lookahead_distance: f64,
    /// Path length after which the lane branch stops, in m.
    pub max_branch_length: f64,
    /// Input samples drawn per lane-branch extension.
    pub candidates: usize,
    /// Largest planner-metric distance at which the previous solution is reused.
    pub reuse_distance: f64,
}

impl Default for DkiConfig {
    fn default() -> Self {
        Self {
            lookahead_distance: 3.0,
            max_branch_length: 40.0,
            candidates: 100,
            reuse_distance: 1.0,
        }
    }
}

impl DkiConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lookahead_distance > 0.0 && self.reuse_distance > 0.0) {
            return Err("lookahead and reuse distances must be positive".into());
        }
        if !(self.max_branch_length >= 0.0) {
            return Err("maximum branch length must be non-negative".into());
        }
        if self.candidates == 0 {
            return Err("at least one candidate per extension is required".into());
        }
        Ok(())
    }
}

// Route search window around the previous tip, in m.
const TRACK_BACK: f64 = 5.0;
const TRACK_AHEAD: f64 = 15.0;

/// Grows a branch from the root that follows the route centerline. Each extension
/// keeps the valid candidate closest to a target state on the lane center ahead.
/// Returns the number of nodes added.
pub fn seed_lane_branch(planner: &mut Planner<'_>, net: &RoadNetwork, dki: &DkiConfig) -> usize {
    let params = *planner.problem().params;
    let speed = planner
        .problem()
        .weights
        .desired_speed
        .clamp(params.speed_bounds[0], params.speed_bounds[1]);
    let reach = speed * planner.config().settings.propagation_time;
    let metric = *planner.tree().metric();
    let mut tip: NodeId = planner.tree().root();
    let mut s_tip = net.route_progress(&planner.tree().node(tip).state.state.position());
    let mut length = 0.0;
    let mut added = 0;

    loop {
        let node = planner.tree().node(tip);
        if node.in_goal || length >= dki.max_branch_length || planner.budget_exhausted() {
            break;
        }
        let tip_state = node.state.state;
        let s_target = s_tip + dki.lookahead_distance;
        if s_target > net.route_length() {
            break;
        }
        let line = net.route_line();
        // aim at the lookahead point, but no farther than one edge at the desired speed
        // reaches, so candidates are not rewarded for overshooting the speed
        let lookahead = line.point_at(s_target);
        let tip_pos = tip_state.position();
        let sight = lookahead.distance(&tip_pos);
        let frac = if sight > reach { reach / sight } else { 1.0 };
        let target = VehicleState::new(
            tip_pos.x + frac * (lookahead.x - tip_pos.x),
            tip_pos.y + frac * (lookahead.y - tip_pos.y),
            line.heading_at(s_target),
            speed,
        );

        let mut best: Option<(f64, TimedState)> = None;
        for _ in 0..dki.candidates {
            let u = planner.sample_input();
            planner.charge(1);
            if let Some(end) = planner.propagate_valid(tip, &u) {
                let d = metric.distance(&end.state, &target);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, end));
                }
            }
        }
        let Some((_, end)) = best else {
            break;
        };
        let next = match planner.insert_seeded(tip, end) {
            Insertion::Added(id) => {
                added += 1;
                id
            }
            // a cheaper node already covers this spot; keep growing from it
            Insertion::Rejected { representative } if representative != tip => representative,
            Insertion::Rejected { .. } => break,
        };
        let next_pos = planner.tree().node(next).state.state.position();
        length += tip_state.position().distance(&next_pos);
        s_tip = net.route_progress_near(&next_pos, s_tip, TRACK_BACK, TRACK_AHEAD);
        tip = next;
    }
    added
}

/// Point on `prev`, at integration-step resolution, closest to `start`:
/// (distance, index of the edge it lies on, its time). The last sample maps to
/// edge `len - 1`.
fn closest_on_previous(
    prev: &Trajectory,
    start: &VehicleState,
    planner: &Planner<'_>,
) -> Option<(f64, usize, f64)> {
    let metric = planner.tree().metric();
    let params = planner.problem().params;
    let samples = &prev.samples;
    let last = samples.last()?;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut consider = |s: &VehicleState, edge: usize, t: f64| {
        let d = metric.distance(s, start);
        if best.is_none_or(|(bd, _, _)| d < bd) {
            best = Some((d, edge, t));
        }
    };
    for (e, pair) in samples.windows(2).enumerate() {
        let u = pair[1].input.unwrap_or(ControlInput::ZERO);
        let n = ((pair[1].t - pair[0].t) / prev.step).round().max(1.0) as usize;
        let mut cur = pair[0].state;
        for k in 0..n {
            consider(&cur, e, pair[0].t + k as f64 * prev.step);
            cur = step(&cur, &u, prev.step, params);
        }
    }
    consider(&last.state, samples.len() - 1, last.t);
    best
}

/// Replays the inputs of `prev` from the root, starting inside the edge closest
/// to the root state so the replayed states keep their original timestamps.
/// Stops at the first invalid state. Returns the number of nodes added.
pub fn seed_previous_branch(
    planner: &mut Planner<'_>,
    prev: &Trajectory,
    dki: &DkiConfig,
) -> usize {
    let root = planner.tree().root();
    let TimedState {
        state: start,
        t: root_t,
        ..
    } = planner.tree().node(root).state;
    let Some((d, first_edge, _)) = closest_on_previous(prev, &start, planner) else {
        return 0;
    };
    if d > dki.reuse_distance {
        return 0;
    }
    let min_duration = 0.5 * prev.step;
    let mut tip = root;
    let mut added = 0;
    let mut from_t = root_t;
    for sample in prev.samples.iter().skip(first_edge + 1) {
        let duration = sample.t - from_t;
        from_t = sample.t;
        if duration < min_duration {
            continue;
        }
        if planner.budget_exhausted() {
            break;
        }
        let u = sample.input.unwrap_or(ControlInput::ZERO);
        planner.charge(1);
        let Some(end) = planner.propagate_valid_for(tip, &u, duration) else {
            break;
        };
        tip = match planner.insert_seeded(tip, end) {
            Insertion::Added(id) => {
                added += 1;
                id
            }
            Insertion::Rejected { representative } if representative != tip => representative,
            Insertion::Rejected { .. } => break,
        };
    }
    added
}

/// SST query seeded with the previous solution (when given) and a lane branch.
/// Seeding work counts against the query budget.
pub fn plan_dki(
    start: VehicleState,
    start_time: f64,
    problem: PlanningProblem<'_>,
    net: &RoadNetwork,
    prev: Option<&Trajectory>,
    config: &PlannerConfig,
    dki: &DkiConfig,
) -> Result<PlanResult, PlanError> {
    dki.validate().map_err(PlanError::Config)?;
    let mut planner = Planner::new(start, start_time, problem, config)?;
    if let Some(prev) = prev {
        seed_previous_branch(&mut planner, prev, dki);
    }
    seed_lane_branch(&mut planner, net, dki);
    Ok(planner.run())
}
