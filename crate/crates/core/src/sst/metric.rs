use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::angle_distance;
use crate::vehicle::VehicleState;

use super::SamplingBounds;

/// How state components are scaled before taking the Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Raw units: meters, radians, m/s.
    #[default]
    Unit,
    /// Each component divided by its sampling-bound extent (2π for heading).
    Extent,
}

/// Weighted Euclidean distance over (x, y, θ, v) with wrap-aware heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateMetric {
    scale: [f64; 4],
}

impl StateMetric {
    pub fn unit() -> Self {
        Self { scale: [1.0; 4] }
    }

    pub fn from_bounds(b: &SamplingBounds) -> Self {
        let extent = |r: [f64; 2]| {
            let e = r[1] - r[0];
            if e > 0.0 {
                e
            } else {
                1.0
            }
        };
        Self {
            scale: [extent(b.x), extent(b.y), 2.0 * PI, extent(b.v)],
        }
    }

    pub fn new(kind: MetricKind, bounds: &SamplingBounds) -> Self {
        match kind {
            MetricKind::Unit => Self::unit(),
            MetricKind::Extent => Self::from_bounds(bounds),
        }
    }

    pub fn distance(&self, a: &VehicleState, b: &VehicleState) -> f64 {
        let dx = (a.x - b.x) / self.scale[0];
        let dy = (a.y - b.y) / self.scale[1];
        let dt = angle_distance(a.theta, b.theta) / self.scale[2];
        let dv = (a.v - b.v) / self.scale[3];
        (dx * dx + dy * dy + dt * dt + dv * dv).sqrt()
    }

    /// Scaled ground-plane coordinates, used for spatial bucketing.
    pub(crate) fn plane(&self, s: &VehicleState) -> (f64, f64) {
        (s.x / self.scale[0], s.y / self.scale[1])
    }

    pub(crate) fn plane_bounds(&self, b: &SamplingBounds) -> ((f64, f64), (f64, f64)) {
        (
            (b.x[0] / self.scale[0], b.y[0] / self.scale[1]),
            (b.x[1] / self.scale[0], b.y[1] / self.scale[1]),
        )
    }
}

pub fn planner_metric(a: &VehicleState, b: &VehicleState, metric: &StateMetric) -> f64 {
    metric.distance(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds() -> SamplingBounds {
        SamplingBounds {
            x: [-10.0, 40.0],
            y: [-5.0, 5.0],
            theta: [-PI, PI],
            v: [0.0, 6.0],
        }
    }

    #[test]
    fn identity() {
        let s = VehicleState::new(3.0, 1.0, 0.5, 4.0);
        assert_eq!(planner_metric(&s, &s, &StateMetric::unit()), 0.0);
        assert_eq!(
            planner_metric(&s, &s, &StateMetric::from_bounds(&bounds())),
            0.0
        );
    }

    #[test]
    fn extent_normalization() {
        let m = StateMetric::from_bounds(&bounds());
        let a = VehicleState::new(-10.0, 0.0, 0.0, 2.0);
        let b = VehicleState::new(40.0, 0.0, 0.0, 2.0);
        assert!((planner_metric(&a, &b, &m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heading_wraps() {
        let a = VehicleState::new(0.0, 0.0, -PI + 0.01, 0.0);
        let b = VehicleState::new(0.0, 0.0, PI - 0.01, 0.0);
        assert!((planner_metric(&a, &b, &StateMetric::unit()) - 0.02).abs() < 1e-9);
        let m = StateMetric::from_bounds(&bounds());
        assert!((planner_metric(&a, &b, &m) - 0.02 / (2.0 * PI)).abs() < 1e-9);
    }

    #[test]
    fn unit_metric_combines_components() {
        let a = VehicleState::new(0.0, 0.0, 0.0, 5.0);
        let b = VehicleState::new(3.0, 0.0, 0.0, 1.0);
        assert!((planner_metric(&a, &b, &StateMetric::unit()) - 5.0).abs() < 1e-12);
    }
}
