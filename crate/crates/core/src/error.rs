use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon has non-finite coordinates")]
    NonFinite,
    #[error("polygon has zero area")]
    Degenerate,
    #[error("polygon is self-intersecting")]
    SelfIntersecting,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error("integration step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error(
        "propagation time {propagation} is not a positive multiple of the integration step {step}"
    )]
    NotAMultiple { propagation: f64, step: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoadError {
    #[error("road network has no lanes")]
    EmptyNetwork,
    #[error("route is empty")]
    EmptyRoute,
    #[error("unknown lane id `{0}`")]
    UnknownLane(String),
    #[error("duplicate lane id `{0}`")]
    DuplicateLane(String),
    #[error("route is disconnected: `{to}` is not a successor of `{from}`")]
    DisconnectedRoute { from: String, to: String },
    #[error("lane `{id}` (index {index}), field `{field}`: {reason}")]
    InvalidLane {
        index: usize,
        id: String,
        field: &'static str,
        reason: String,
    },
    #[error("grid resolution must be positive, got {0}")]
    NonPositiveResolution(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("route exhausted: need arc length {needed:.2} m but route is {available:.2} m long")]
    RouteExhausted { needed: f64, available: f64 },
    #[error("goal threshold must be positive, got {0}")]
    NonPositiveGoalThreshold(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("motion cost needs increasing timestamps, got {from} -> {to}")]
    NonIncreasingTime { from: f64, to: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("start state is invalid")]
    InvalidStart,
    #[error("planner tree has no active nodes")]
    EmptyTree,
    #[error("planner tree has no node inside the goal region")]
    NoGoalNode,
    #[error("invalid planner configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("bad override `{0}`: expected key=value with a dotted key path")]
    BadOverride(String),
}

impl ScenarioError {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Road(#[from] RoadError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("simulation log is empty")]
    EmptyLog,
}
