use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cost::CostWeights;
use crate::dki::DkiConfig;
use crate::error::{RoadError, ScenarioError};
use crate::objects::{
    ObjectKind, ObjectPose, ObjectPrediction, RepulsiveField, WorldModel, WorldObject,
};
use crate::road::{build_penalty_grid, GridBounds, Lane, PenaltyGrid, RoadNetwork};
use crate::sst::PlannerSettings;
use crate::vehicle::{VehicleParams, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSettings {
    pub resolution: f64,
    /// Extra padding around the lanes when `bounds` is not given, in m.
    pub margin: f64,
    pub bounds: Option<GridBounds>,
    pub max_penalty: f64,
    /// Cells at or above this value make a state invalid.
    pub invalid_penalty: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            resolution: 0.1,
            margin: 2.0,
            bounds: None,
            max_penalty: 100.0,
            invalid_penalty: 99.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSection {
    pub lanes: Vec<Lane>,
    pub route: Vec<String>,
    #[serde(default)]
    pub grid: GridSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoSection {
    pub state: VehicleState,
    #[serde(default)]
    pub params: VehicleParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    #[serde(default)]
    pub kind: ObjectKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    pub poses: Vec<ObjectPose>,
    #[serde(default)]
    pub field: RepulsiveField,
}

impl ObjectSpec {
    pub fn to_world_object(&self) -> WorldObject {
        let (length, width) = self.kind.default_footprint();
        WorldObject {
            prediction: ObjectPrediction {
                id: self.id.clone(),
                length: self.length.unwrap_or(length),
                width: self.width.unwrap_or(width),
                poses: self.poses.clone(),
            },
            field: self.field,
        }
    }
}

/// How per-sample values are averaged into a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// One mean over every sample of every planned trajectory.
    #[default]
    Pooled,
    /// Mean of the per-trajectory means.
    PerTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    /// Simulated time, in s.
    pub duration: f64,
    /// Replanning frequency, in Hz.
    pub planning_rate: f64,
    /// Route distance from the ego to the goal band center, in m.
    pub goal_distance: f64,
    /// Half length of the goal band along the route, in m.
    pub goal_threshold: f64,
    pub averaging: Averaging,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            duration: 10.0,
            planning_rate: 2.0,
            goal_distance: 30.0,
            goal_threshold: 2.0,
            averaging: Averaging::Pooled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub road: RoadSection,
    pub ego: EgoSection,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub planner: PlannerSettings,
    #[serde(default)]
    pub dki: DkiConfig,
    #[serde(default)]
    pub weights: CostWeights,
    #[serde(default)]
    pub sim: SimSettings,
}

/// Road network, penalty grid and predicted objects built from a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub net: RoadNetwork,
    pub grid: PenaltyGrid,
    pub world: WorldModel,
}

fn road_error(e: RoadError) -> ScenarioError {
    match e {
        RoadError::InvalidLane {
            index,
            field,
            reason,
            ..
        } => ScenarioError::invalid(format!("road.lanes[{index}].{field}"), reason),
        RoadError::UnknownLane(_) | RoadError::DisconnectedRoute { .. } | RoadError::EmptyRoute => {
            ScenarioError::invalid("road.route", e.to_string())
        }
        RoadError::DuplicateLane(_) | RoadError::EmptyNetwork => {
            ScenarioError::invalid("road.lanes", e.to_string())
        }
        other => ScenarioError::invalid("road.grid", other.to_string()),
    }
}

impl Scenario {
    pub fn environment(&self) -> Result<Environment, ScenarioError> {
        let net = RoadNetwork::new(self.road.lanes.clone(), self.road.route.clone())
            .map_err(road_error)?;
        let g = &self.road.grid;
        let bounds = g
            .bounds
            .unwrap_or_else(|| GridBounds::around(&net, g.margin, g.resolution));
        let grid = build_penalty_grid(
            &net,
            &bounds,
            g.resolution,
            g.max_penalty,
            g.invalid_penalty,
        )
        .map_err(road_error)?;
        let world = WorldModel::new(
            self.objects
                .iter()
                .map(ObjectSpec::to_world_object)
                .collect(),
        );
        Ok(Environment { net, grid, world })
    }

    /// Semantic checks; builds and returns the environment on success.
    pub fn validate(&self) -> Result<Environment, ScenarioError> {
        let p = &self.ego.params;
        p.validate()
            .map_err(|m| ScenarioError::invalid("ego.params", m))?;
        self.planner
            .validate()
            .map_err(|m| ScenarioError::invalid("planner", m))?;
        self.dki
            .validate()
            .map_err(|m| ScenarioError::invalid("dki", m))?;
        self.weights
            .validate(p.speed_bounds)
            .map_err(|m| ScenarioError::invalid("weights", m))?;
        let s = &self.sim;
        if !(s.duration > 0.0 && s.duration.is_finite()) {
            return Err(ScenarioError::invalid("sim.duration", "must be positive"));
        }
        if !(s.planning_rate > 0.0 && s.planning_rate.is_finite()) {
            return Err(ScenarioError::invalid(
                "sim.planning_rate",
                "must be positive",
            ));
        }
        if !(s.goal_distance > 0.0 && s.goal_threshold > 0.0) {
            return Err(ScenarioError::invalid(
                "sim",
                "goal distance and threshold must be positive",
            ));
        }
        let g = &self.road.grid;
        if !(g.resolution > 0.0) {
            return Err(ScenarioError::invalid(
                "road.grid.resolution",
                "must be positive",
            ));
        }
        for (i, o) in self.objects.iter().enumerate() {
            let obj = o.to_world_object();
            obj.prediction
                .validate()
                .map_err(|m| ScenarioError::invalid(format!("objects[{i}]"), m))?;
            let f = obj.field;
            if !(f.amplitude >= 0.0 && f.sigma_x > 0.0 && f.sigma_y > 0.0) {
                return Err(ScenarioError::invalid(
                    format!("objects[{i}].field"),
                    "amplitude must be non-negative and sigmas positive",
                ));
            }
        }
        let env = self.environment()?;
        let ego = &self.ego.state;
        if !ego.is_finite() {
            return Err(ScenarioError::invalid("ego.state", "must be finite"));
        }
        if !(ego.v >= p.speed_bounds[0] && ego.v <= p.speed_bounds[1]) {
            return Err(ScenarioError::invalid(
                "ego.state.v",
                "outside the speed bounds",
            ));
        }
        if env.grid.is_lane_invalid(ego.x, ego.y) {
            return Err(ScenarioError::invalid(
                "ego.state",
                "initial position is off the road",
            ));
        }
        Ok(env)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

fn parse_error(e: serde_path_to_error::Error<serde_json::Error>) -> ScenarioError {
    let field = e.path().to_string();
    let inner = e.into_inner();
    ScenarioError::Parse {
        line: inner.line(),
        column: inner.column(),
        field,
        message: inner.to_string(),
    }
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(&mut de).map_err(parse_error)?;
    de.end().map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        field: String::new(),
        message: e.to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    parse_scenario(&read(path.as_ref())?)
}

/// Loads a scenario after applying `key.path=value` overrides. Values parse as
/// JSON when possible and as plain strings otherwise.
pub fn load_scenario_with_overrides(
    path: impl AsRef<Path>,
    overrides: &[String],
) -> Result<Scenario, ScenarioError> {
    let text = read(path.as_ref())?;
    if overrides.is_empty() {
        return parse_scenario(&text);
    }
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        field: String::new(),
        message: e.to_string(),
    })?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    parse_scenario(&serde_json::to_string_pretty(&doc).expect("value serializes"))
}

pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), ScenarioError> {
    let bad = || ScenarioError::BadOverride(assignment.to_string());
    let (key, raw) = assignment.split_once('=').ok_or_else(bad)?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(bad());
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let (leaf, parents) = parts.split_last().expect("non-empty key");
    let mut cur = doc;
    for part in parents {
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
        cur = match cur {
            Value::Array(items) => items
                .get_mut(part.parse::<usize>().map_err(|_| bad())?)
                .ok_or_else(bad)?,
            Value::Object(map) => map
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default())),
            _ => return Err(bad()),
        };
    }
    match cur {
        Value::Array(items) => {
            let slot = items
                .get_mut(leaf.parse::<usize>().map_err(|_| bad())?)
                .ok_or_else(bad)?;
            *slot = value;
        }
        Value::Object(map) => {
            map.insert(leaf.to_string(), value);
        }
        _ => return Err(bad()),
    }
    Ok(())
}
