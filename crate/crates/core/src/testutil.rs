use crate::cost::CostWeights;
use crate::geometry::Point2;
use crate::objects::{ObjectPose, ObjectPrediction, RepulsiveField, WorldModel, WorldObject};
use crate::road::{
    build_penalty_grid, compute_goal_region, GoalRegion, GridBounds, Lane, PenaltyGrid, RoadNetwork,
};
use crate::sst::{Budget, PlannerConfig, PlannerSettings, PlanningProblem, SamplingBounds};
use crate::vehicle::{VehicleParams, VehicleState};

pub fn lane(id: &str, y: f64, len: f64) -> Lane {
    Lane {
        id: id.into(),
        width: 3.5,
        centerline: vec![Point2::new(0.0, y), Point2::new(len, y)],
        successors: vec![],
    }
}

pub fn static_object(id: &str, x: f64, y: f64) -> WorldObject {
    WorldObject {
        prediction: ObjectPrediction {
            id: id.into(),
            length: 4.0,
            width: 2.0,
            poses: vec![ObjectPose {
                t: 0.0,
                x,
                y,
                theta: 0.0,
            }],
        },
        field: RepulsiveField::default(),
    }
}

pub struct Fixture {
    pub net: RoadNetwork,
    pub grid: PenaltyGrid,
    pub world: WorldModel,
    pub params: VehicleParams,
    pub weights: CostWeights,
    pub goal: GoalRegion,
    pub start: VehicleState,
    pub config: PlannerConfig,
}

impl Fixture {
    /// Straight road along +x with `lanes` lanes, ego on the first centerline at x = 5.
    pub fn straight(lanes: usize, iterations: u64, seed: u64) -> Self {
        let lane_list: Vec<Lane> = (0..lanes)
            .map(|i| lane(&format!("l{i}"), 3.5 * i as f64, 120.0))
            .collect();
        let net = RoadNetwork::new(lane_list, vec!["l0".into()]).unwrap();
        let bounds = GridBounds::around(&net, 2.0, 0.25);
        let grid = build_penalty_grid(&net, &bounds, 0.25, 100.0, 99.0).unwrap();
        let start = VehicleState::new(5.0, 0.0, 0.0, 5.0);
        let goal = compute_goal_region(&net, &start, 30.0, 2.0).unwrap();
        let params = VehicleParams::default();
        let settings = PlannerSettings {
            budget: Budget::Iterations(iterations),
            ..PlannerSettings::default()
        };
        let config = PlannerConfig {
            settings,
            bounds: SamplingBounds::around(
                &start.position(),
                &goal,
                settings.sampling_margin,
                params.speed_bounds,
            ),
            seed,
        };
        Self {
            net,
            grid,
            world: WorldModel::default(),
            params,
            weights: CostWeights::default(),
            goal,
            start,
            config,
        }
    }

    pub fn problem(&self) -> PlanningProblem<'_> {
        PlanningProblem {
            goal: &self.goal,
            grid: &self.grid,
            world: &self.world,
            params: &self.params,
            weights: &self.weights,
        }
    }
}
