use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::objects::predicted_pose_at;

use super::{Averaging, Environment, Scenario, SimLog, Termination};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean |a| over the edges of all planned trajectories, in m/s².
    pub mean_abs_acceleration: f64,
    /// Mean |v - desired speed| over planned samples, in m/s.
    pub mean_speed_deviation: f64,
    /// Mean distance from planned samples to the closest lane center, in m.
    pub mean_lane_deviation: f64,
    /// Smallest ego-to-object center distance over executed states, in m.
    pub min_target_distance: Option<f64>,
    pub collisions: usize,
    pub lane_invalid_states: usize,
    /// Route arc length covered by the executed path, in m.
    pub goal_progress: f64,
    pub ticks: usize,
    pub fallback_ticks: usize,
    pub termination: Termination,
}

#[derive(Default)]
struct Accumulator {
    pooled_sum: f64,
    pooled_n: usize,
    means_sum: f64,
    means_n: usize,
    current_sum: f64,
    current_n: usize,
}

impl Accumulator {
    fn push(&mut self, v: f64) {
        self.pooled_sum += v;
        self.pooled_n += 1;
        self.current_sum += v;
        self.current_n += 1;
    }

    fn close(&mut self) {
        if self.current_n > 0 {
            self.means_sum += self.current_sum / self.current_n as f64;
            self.means_n += 1;
        }
        self.current_sum = 0.0;
        self.current_n = 0;
    }

    fn mean(&self, averaging: Averaging) -> f64 {
        let (sum, n) = match averaging {
            Averaging::Pooled => (self.pooled_sum, self.pooled_n),
            Averaging::PerTrajectory => (self.means_sum, self.means_n),
        };
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Table-style indicators; a pure function of the log.
pub fn compute_metrics(
    log: &SimLog,
    sc: &Scenario,
    env: &Environment,
) -> Result<MetricsReport, SimError> {
    if log.executed.is_empty() {
        return Err(SimError::EmptyLog);
    }
    let desired = sc.weights.desired_speed;
    let mut accel = Accumulator::default();
    let mut speed = Accumulator::default();
    let mut lane = Accumulator::default();
    for traj in log.ticks.iter().filter_map(|r| r.planned.as_ref()) {
        for s in &traj.samples {
            if let Some(u) = s.input {
                accel.push(u.a.abs());
            }
            speed.push((s.state.v - desired).abs());
            lane.push(env.net.nearest_lane_center(&s.state.position()).distance);
        }
        accel.close();
        speed.close();
        lane.close();
    }

    let min_target_distance = log
        .executed
        .iter()
        .flat_map(|s| {
            env.world.objects.iter().map(move |o| {
                predicted_pose_at(&o.prediction, s.t)
                    .position()
                    .distance(&s.state.position())
            })
        })
        .min_by(f64::total_cmp);

    let first = log
        .executed
        .first()
        .expect("checked non-empty")
        .state
        .position();
    let start_s = env.net.route_progress(&first);
    let mut s = start_s;
    // follow the path so a route passing close to itself does not confuse the projection
    for p in log.executed.iter().step_by(5).chain(log.executed.last()) {
        s = env
            .net
            .route_progress_near(&p.state.position(), s, 5.0, 15.0);
    }

    Ok(MetricsReport {
        mean_abs_acceleration: accel.mean(sc.sim.averaging),
        mean_speed_deviation: speed.mean(sc.sim.averaging),
        mean_lane_deviation: lane.mean(sc.sim.averaging),
        min_target_distance,
        collisions: log.collisions.len(),
        lane_invalid_states: log.lane_invalid_states,
        goal_progress: s - start_s,
        ticks: log.ticks.len(),
        fallback_ticks: log.ticks.iter().filter(|r| r.fallback).count(),
        termination: log.termination,
    })
}

/// Relative improvement of `dki` over `base` in percent. Lower is better unless
/// `higher_is_better`, as for distances.
pub fn gain_percent(base: f64, dki: f64, higher_is_better: bool) -> Option<f64> {
    if base == 0.0 {
        return (base == dki).then_some(0.0);
    }
    Some(if higher_is_better {
        (dki - base) / base * 100.0
    } else {
        (base - dki) / base * 100.0
    })
}
