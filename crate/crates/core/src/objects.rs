//! Predicted traffic participants and their repulsive clearance field.

use serde::{Deserialize, Serialize};

use crate::geometry::{boxes_overlap, normalize_angle, OrientedBox, Point2};
use crate::vehicle::VehicleState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectPose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl ObjectPose {
    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    #[default]
    Vehicle,
    Pedestrian,
}

impl ObjectKind {
    /// Default footprint as (length, width).
    pub fn default_footprint(self) -> (f64, f64) {
        match self {
            ObjectKind::Vehicle => (4.0, 2.0),
            ObjectKind::Pedestrian => (0.6, 0.6),
        }
    }
}

/// Noise-free predicted pose sequence of one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPrediction {
    pub id: String,
    pub length: f64,
    pub width: f64,
    pub poses: Vec<ObjectPose>,
}

impl ObjectPrediction {
    pub fn validate(&self) -> Result<(), String> {
        if self.poses.is_empty() {
            return Err("needs at least one pose".into());
        }
        if !(self.length > 0.0 && self.width > 0.0) {
            return Err("footprint must be positive".into());
        }
        if self.poses.iter().any(|p| {
            !(p.t.is_finite() && p.x.is_finite() && p.y.is_finite() && p.theta.is_finite())
        }) {
            return Err("poses must be finite".into());
        }
        if self.poses.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err("pose timestamps must be strictly increasing".into());
        }
        Ok(())
    }

    pub fn footprint_at(&self, t: f64) -> OrientedBox {
        let p = predicted_pose_at(self, t);
        OrientedBox::new(p.position(), p.theta, self.length, self.width)
    }
}

/// Linear position and shortest-arc heading interpolation, clamped outside the horizon.
pub fn predicted_pose_at(obj: &ObjectPrediction, t: f64) -> ObjectPose {
    let poses = &obj.poses;
    let first = poses[0];
    if t <= first.t {
        return ObjectPose { t, ..first };
    }
    let last = poses[poses.len() - 1];
    if t >= last.t {
        return ObjectPose { t, ..last };
    }
    let i = poses.partition_point(|p| p.t <= t);
    let a = poses[i - 1];
    let b = poses[i];
    if t == a.t {
        return a;
    }
    let u = (t - a.t) / (b.t - a.t);
    ObjectPose {
        t,
        x: a.x + u * (b.x - a.x),
        y: a.y + u * (b.y - a.y),
        theta: normalize_angle(a.theta + u * normalize_angle(b.theta - a.theta)),
    }
}

/// Gaussian-shaped repulsive potential parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepulsiveField {
    pub amplitude: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl Default for RepulsiveField {
    fn default() -> Self {
        Self {
            amplitude: 100.0,
            sigma_x: 3.0,
            sigma_y: 2.0,
        }
    }
}

impl RepulsiveField {
    /// The exponent divides squared offsets by sigma, not sigma squared.
    pub fn value(&self, dx: f64, dy: f64) -> f64 {
        let f = dx * dx / self.sigma_x + dy * dy / self.sigma_y;
        self.amplitude * (-f).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldObject {
    pub prediction: ObjectPrediction,
    pub field: RepulsiveField,
}

/// The predicted object set used during one planning query.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorldModel {
    pub objects: Vec<WorldObject>,
}

impl WorldModel {
    pub fn new(objects: Vec<WorldObject>) -> Self {
        Self { objects }
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// True if `footprint` overlaps any object footprint at time `t`.
    pub fn collides(&self, footprint: &OrientedBox, t: f64) -> bool {
        self.objects
            .iter()
            .any(|o| boxes_overlap(footprint, &o.prediction.footprint_at(t)))
    }

    /// Smallest center-to-center distance to any object at time `t`.
    pub fn min_center_distance(&self, p: &Point2, t: f64) -> Option<f64> {
        self.objects
            .iter()
            .map(|o| predicted_pose_at(&o.prediction, t).position().distance(p))
            .min_by(f64::total_cmp)
    }
}

pub fn clearance_cost(s: &VehicleState, t: f64, world: &WorldModel) -> f64 {
    world
        .objects
        .iter()
        .map(|o| {
            let pose = predicted_pose_at(&o.prediction, t);
            o.field.value(s.x - pose.x, s.y - pose.y)
        })
        .sum()
}
