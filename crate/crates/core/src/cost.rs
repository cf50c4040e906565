//! Weighted multi-objective costs: path length plus time-integrated state costs.

use serde::{Deserialize, Serialize};

use crate::error::CostError;
use crate::objects::{clearance_cost, WorldModel};
use crate::road::PenaltyGrid;
use crate::vehicle::{TimedState, Trajectory, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub path_length: f64,
    pub desired_velocity: f64,
    pub penalty_grid: f64,
    pub target_clearance: f64,
    /// Desired speed in m/s.
    pub desired_speed: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            path_length: 0.05,
            desired_velocity: 0.5,
            penalty_grid: 0.2,
            target_clearance: 2.0,
            desired_speed: 5.0,
        }
    }
}

impl CostWeights {
    pub fn validate(&self, speed_bounds: [f64; 2]) -> Result<(), String> {
        let w = [
            self.path_length,
            self.desired_velocity,
            self.penalty_grid,
            self.target_clearance,
        ];
        if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err("weights must be finite and non-negative".into());
        }
        if !(self.desired_speed >= speed_bounds[0] && self.desired_speed <= speed_bounds[1]) {
            return Err(format!(
                "desired speed {} outside speed bounds [{}, {}]",
                self.desired_speed, speed_bounds[0], speed_bounds[1]
            ));
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            path_length: self.path_length * k,
            desired_velocity: self.desired_velocity * k,
            penalty_grid: self.penalty_grid * k,
            target_clearance: self.target_clearance * k,
            desired_speed: self.desired_speed,
        }
    }
}

/// Unweighted state-cost components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateCost {
    pub velocity: f64,
    pub penalty: f64,
    pub clearance: f64,
}

impl StateCost {
    pub fn weighted(&self, w: &CostWeights) -> f64 {
        w.desired_velocity * self.velocity
            + w.penalty_grid * self.penalty
            + w.target_clearance * self.clearance
    }
}

pub fn state_cost_components(
    s: &VehicleState,
    t: f64,
    grid: &PenaltyGrid,
    world: &WorldModel,
    w: &CostWeights,
) -> StateCost {
    StateCost {
        velocity: (s.v - w.desired_speed).abs(),
        penalty: grid.lookup(s.x, s.y),
        clearance: if world.is_empty() {
            0.0
        } else {
            clearance_cost(s, t, world)
        },
    }
}

/// Grid, objects and weights bundled for repeated cost evaluation.
#[derive(Debug, Clone, Copy)]
pub struct CostModel<'a> {
    pub grid: &'a PenaltyGrid,
    pub world: &'a WorldModel,
    pub weights: &'a CostWeights,
}

impl<'a> CostModel<'a> {
    pub fn new(grid: &'a PenaltyGrid, world: &'a WorldModel, weights: &'a CostWeights) -> Self {
        Self {
            grid,
            world,
            weights,
        }
    }

    pub fn weighted_state_cost(&self, s: &TimedState) -> f64 {
        state_cost_components(&s.state, s.t, self.grid, self.world, self.weights)
            .weighted(self.weights)
    }

    /// Edge cost from precomputed weighted state costs of both endpoints.
    pub fn edge_cost(&self, a: &TimedState, cost_a: f64, b: &TimedState, cost_b: f64) -> f64 {
        let dt = b.t - a.t;
        let length = a.state.position().distance(&b.state.position());
        self.weights.path_length * length + dt * 0.5 * (cost_a + cost_b)
    }

    pub fn motion_cost(&self, a: &TimedState, b: &TimedState) -> Result<f64, CostError> {
        if !(b.t > a.t) {
            return Err(CostError::NonIncreasingTime { from: a.t, to: b.t });
        }
        Ok(self.edge_cost(
            a,
            self.weighted_state_cost(a),
            b,
            self.weighted_state_cost(b),
        ))
    }

    pub fn trajectory_cost(&self, traj: &Trajectory) -> Result<f64, CostError> {
        let mut total = 0.0;
        for w in traj.samples.windows(2) {
            total += self.motion_cost(&w[0], &w[1])?;
        }
        Ok(total)
    }
}

pub fn motion_cost(
    a: &TimedState,
    b: &TimedState,
    grid: &PenaltyGrid,
    world: &WorldModel,
    w: &CostWeights,
) -> Result<f64, CostError> {
    CostModel::new(grid, world, w).motion_cost(a, b)
}

pub fn trajectory_cost(
    traj: &Trajectory,
    grid: &PenaltyGrid,
    world: &WorldModel,
    w: &CostWeights,
) -> Result<f64, CostError> {
    CostModel::new(grid, world, w).trajectory_cost(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::objects::{ObjectPose, ObjectPrediction, RepulsiveField, WorldObject};
    use crate::road::{build_penalty_grid, GridBounds, Lane, RoadNetwork};
    use crate::vehicle::{propagate, ControlInput, VehicleParams};
    use proptest::prelude::*;

    fn grid() -> PenaltyGrid {
        let net = RoadNetwork::new(
            vec![Lane {
                id: "a".into(),
                width: 3.5,
                centerline: vec![Point2::new(-10.0, 0.0), Point2::new(100.0, 0.0)],
                successors: vec![],
            }],
            vec!["a".into()],
        )
        .unwrap();
        let bounds = GridBounds {
            min: Point2::new(-10.0, -5.0625),
            max: Point2::new(100.0, 5.0625),
        };
        build_penalty_grid(&net, &bounds, 0.125, 100.0, 99.0).unwrap()
    }

    fn ts(x: f64, y: f64, v: f64, t: f64) -> TimedState {
        TimedState::root(VehicleState::new(x, y, 0.0, v), t)
    }

    fn pedestrian(x: f64, y: f64) -> WorldModel {
        WorldModel::new(vec![WorldObject {
            prediction: ObjectPrediction {
                id: "p".into(),
                length: 0.6,
                width: 0.6,
                poses: vec![
                    ObjectPose {
                        t: 0.0,
                        x,
                        y,
                        theta: 0.0,
                    },
                    ObjectPose {
                        t: 10.0,
                        x: x + 5.0,
                        y,
                        theta: 0.0,
                    },
                ],
            },
            field: RepulsiveField::default(),
        }])
    }

    #[test]
    fn state_cost_examples() {
        let g = grid();
        let w = CostWeights::default();
        let none = WorldModel::default();
        let c = state_cost_components(&VehicleState::new(5.0, 0.0, 0.0, 5.0), 0.0, &g, &none, &w);
        assert_eq!(c, StateCost::default());
        let c = state_cost_components(&VehicleState::new(5.0, 0.0, 0.0, 3.48), 0.0, &g, &none, &w);
        assert!((c.velocity - 1.52).abs() < 1e-12);
        let c = state_cost_components(&VehicleState::new(5.0, 0.875, 0.0, 5.0), 0.0, &g, &none, &w);
        assert!((c.penalty - 50.0).abs() < 1e-9);
    }

    #[test]
    fn motion_cost_examples() {
        let g = grid();
        let none = WorldModel::default();
        let w = CostWeights::default();
        let m = CostModel::new(&g, &none, &w);
        // (3, 4) lies off the lane, so drop the grid term to keep state costs at zero
        let w_no_grid = CostWeights {
            penalty_grid: 0.0,
            ..w
        };
        let c = CostModel::new(&g, &none, &w_no_grid)
            .motion_cost(&ts(0.0, 0.0, 5.0, 0.0), &ts(3.0, 4.0, 5.0, 0.4))
            .unwrap();
        assert!((c - 0.25).abs() < 1e-12);

        // zero displacement with weighted state costs 2 and 4
        let w2 = CostWeights {
            desired_velocity: 1.0,
            ..CostWeights::default()
        };
        let m2 = CostModel::new(&g, &none, &w2);
        let c = m2
            .motion_cost(&ts(1.0, 0.0, 3.0, 0.0), &ts(1.0, 0.0, 1.0, 0.4))
            .unwrap();
        assert!((c - 1.2).abs() < 1e-12);

        let same = ts(2.0, 0.0, 5.0, 0.0);
        let later = TimedState { t: 0.4, ..same };
        assert_eq!(m.motion_cost(&same, &later).unwrap(), 0.0);
        assert!(matches!(
            m.motion_cost(&later, &same),
            Err(CostError::NonIncreasingTime { .. })
        ));
    }

    #[test]
    fn trajectory_cost_examples() {
        let g = grid();
        let none = WorldModel::default();
        let w = CostWeights {
            desired_velocity: 1.0,
            ..CostWeights::default()
        };
        let m = CostModel::new(&g, &none, &w);
        assert_eq!(
            m.trajectory_cost(&Trajectory::new(vec![ts(0.0, 0.0, 5.0, 0.0)], 0.04))
                .unwrap(),
            0.0
        );

        let a = ts(0.0, 0.0, 5.0, 0.0);
        let b = ts(5.0, 0.0, 5.0, 0.4);
        // |11 - 5| = 6 at the last sample: 0.4 * (0 + 6) / 2 = 1.2
        let c = ts(5.0, 0.0, 11.0, 0.8);
        assert!((m.motion_cost(&a, &b).unwrap() - 0.25).abs() < 1e-12);
        assert!((m.motion_cost(&b, &c).unwrap() - 1.2).abs() < 1e-12);
        let two = Trajectory::new(vec![a, b, c], 0.04);
        assert!((m.trajectory_cost(&two).unwrap() - 1.45).abs() < 1e-12);
    }

    #[test]
    fn zero_clearance_weight_ignores_objects() {
        let g = grid();
        let w = CostWeights {
            target_clearance: 0.0,
            ..CostWeights::default()
        };
        let traj = Trajectory::new(vec![ts(0.0, 0.0, 5.0, 0.0), ts(2.0, 0.1, 5.0, 0.4)], 0.04);
        let a = trajectory_cost(&traj, &g, &WorldModel::default(), &w).unwrap();
        let b = trajectory_cost(&traj, &g, &pedestrian(1.0, 0.0), &w).unwrap();
        assert_eq!(a, b);
        let w_tc = CostWeights::default();
        assert!(trajectory_cost(&traj, &g, &pedestrian(1.0, 0.0), &w_tc).unwrap() > a);
    }

    fn rollout(inputs: &[(f64, f64)]) -> Trajectory {
        let p = VehicleParams::default();
        let mut samples = vec![ts(0.0, 0.0, 5.0, 0.0)];
        for (a, d) in inputs {
            let from = *samples.last().unwrap();
            let u = ControlInput::new(*a, *d);
            let s = propagate(&from.state, &u, 0.4, 0.04, &p)
                .unwrap()
                .pop()
                .unwrap();
            samples.push(TimedState {
                state: s,
                t: from.t + 0.4,
                input: Some(u),
            });
        }
        Trajectory::new(samples, 0.04)
    }

    proptest! {
        #[test]
        fn costs_nonnegative_additive_and_scalable(
            inputs in prop::collection::vec((-0.8..0.8f64, -0.1..0.1f64), 2..10),
            split in 1usize..9,
            k in 0.1..10.0f64,
        ) {
            let g = grid();
            let world = pedestrian(15.0, 1.0);
            let w = CostWeights::default();
            let m = CostModel::new(&g, &world, &w);
            let traj = rollout(&inputs);
            for e in traj.samples.windows(2) {
                prop_assert!(m.motion_cost(&e[0], &e[1]).unwrap() >= 0.0);
            }
            let split = split.min(traj.len() - 1);
            let head = Trajectory::new(traj.samples[..=split].to_vec(), 0.04);
            let tail = Trajectory::new(traj.samples[split..].to_vec(), 0.04);
            let total = m.trajectory_cost(&traj).unwrap();
            let parts = m.trajectory_cost(&head).unwrap() + m.trajectory_cost(&tail).unwrap();
            prop_assert!((total - parts).abs() <= 1e-9 * total.max(1.0));

            let ws = w.scaled(k);
            let scaled = CostModel::new(&g, &world, &ws).trajectory_cost(&traj).unwrap();
            prop_assert!((scaled - k * total).abs() <= 1e-9 * scaled.max(1.0));
        }

        #[test]
        fn scaling_preserves_argmin(
            a in prop::collection::vec((-0.8..0.8f64, -0.1..0.1f64), 3..6),
            b in prop::collection::vec((-0.8..0.8f64, -0.1..0.1f64), 3..6),
            c in prop::collection::vec((-0.8..0.8f64, -0.1..0.1f64), 3..6),
            k in 0.1..10.0f64,
        ) {
            let g = grid();
            let world = WorldModel::default();
            let w = CostWeights::default();
            let ws = w.scaled(k);
            let set = [rollout(&a), rollout(&b), rollout(&c)];
            let argmin = |m: &CostModel| {
                set.iter()
                    .enumerate()
                    .map(|(i, t)| (m.trajectory_cost(t).unwrap(), i))
                    .min_by(|x, y| x.0.total_cmp(&y.0))
                    .unwrap()
            };
            let (c1, i1) = argmin(&CostModel::new(&g, &world, &w));
            let (c2, i2) = argmin(&CostModel::new(&g, &world, &ws));
            // ties within rounding may swap order
            prop_assert!(i1 == i2 || (c1 * k - c2).abs() <= 1e-9 * c2.max(1.0));
        }

        #[test]
        fn constant_state_cost_integrates_exactly(v in 0.0..6.0f64, dt in 0.04..2.0f64) {
            let g = grid();
            let world = WorldModel::default();
            let w = CostWeights { path_length: 0.0, ..CostWeights::default() };
            let m = CostModel::new(&g, &world, &w);
            let a = ts(5.0, 0.0, v, 0.0);
            let b = ts(5.0, 0.0, v, dt);
            let c = m.weighted_state_cost(&a);
            prop_assert!((m.motion_cost(&a, &b).unwrap() - dt * c).abs() <= 1e-12 * (dt * c).max(1.0));
        }
    }
}
