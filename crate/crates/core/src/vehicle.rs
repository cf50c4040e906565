//! Kinematic bicycle model with Euler integration.

use serde::{Deserialize, Serialize};

use crate::error::VehicleError;
use crate::geometry::{normalize_angle, OrientedBox, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, theta: f64, v: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
            v,
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite() && self.v.is_finite()
    }

    pub fn footprint(&self, params: &VehicleParams) -> OrientedBox {
        OrientedBox::new(self.position(), self.theta, params.length, params.width)
    }
}

/// Longitudinal acceleration and steering angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub a: f64,
    pub delta: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { a: 0.0, delta: 0.0 };

    pub fn new(a: f64, delta: f64) -> Self {
        Self { a, delta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub length: f64,
    pub width: f64,
    pub speed_bounds: [f64; 2],
    pub accel_bounds: [f64; 2],
    pub steer_bounds: [f64; 2],
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.7,
            length: 4.0,
            width: 2.0,
            speed_bounds: [0.0, 6.0],
            accel_bounds: [-0.8, 0.8],
            steer_bounds: [-0.4, 0.4],
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), String> {
        let ordered = |b: &[f64; 2]| b[0].is_finite() && b[1].is_finite() && b[0] <= b[1];
        if !(self.wheelbase > 0.0) {
            return Err(format!(
                "wheelbase must be positive, got {}",
                self.wheelbase
            ));
        }
        if !(self.length > 0.0 && self.width > 0.0) {
            return Err("footprint length and width must be positive".into());
        }
        if !ordered(&self.speed_bounds) || self.speed_bounds[0] < 0.0 {
            return Err("speed bounds must be ordered with a non-negative minimum".into());
        }
        if !ordered(&self.accel_bounds) || !ordered(&self.steer_bounds) {
            return Err("input bounds must be ordered".into());
        }
        Ok(())
    }

    pub fn input_within_bounds(&self, u: &ControlInput) -> bool {
        u.a >= self.accel_bounds[0]
            && u.a <= self.accel_bounds[1]
            && u.delta >= self.steer_bounds[0]
            && u.delta <= self.steer_bounds[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedState {
    pub state: VehicleState,
    pub t: f64,
    /// Input applied over the edge ending at this sample; `None` for roots.
    pub input: Option<ControlInput>,
}

impl TimedState {
    pub fn root(state: VehicleState, t: f64) -> Self {
        Self {
            state,
            t,
            input: None,
        }
    }
}

/// One Euler step of the bicycle model, followed by a speed clamp and heading wrap.
pub fn step(s: &VehicleState, u: &ControlInput, ts: f64, p: &VehicleParams) -> VehicleState {
    let (sin, cos) = s.theta.sin_cos();
    VehicleState {
        x: s.x + ts * s.v * cos,
        y: s.y + ts * s.v * sin,
        theta: normalize_angle(s.theta + ts * (s.v / p.wheelbase) * u.delta.tan()),
        v: (s.v + ts * u.a).clamp(p.speed_bounds[0], p.speed_bounds[1]),
    }
}

/// Number of integration steps in one propagation of length `tp`.
pub fn steps_per_propagation(tp: f64, ts: f64) -> Result<usize, VehicleError> {
    if !(ts > 0.0) {
        return Err(VehicleError::NonPositiveStep(ts));
    }
    let ratio = tp / ts;
    let n = ratio.round();
    if !(n >= 1.0) || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(VehicleError::NotAMultiple {
            propagation: tp,
            step: ts,
        });
    }
    Ok(n as usize)
}

/// Applies `u` for `n_steps` integration steps, returning every intermediate state.
pub fn propagate_steps(
    s: &VehicleState,
    u: &ControlInput,
    n_steps: usize,
    ts: f64,
    p: &VehicleParams,
) -> Vec<VehicleState> {
    let mut out = Vec::with_capacity(n_steps);
    let mut cur = *s;
    for _ in 0..n_steps {
        cur = step(&cur, u, ts, p);
        out.push(cur);
    }
    out
}

/// Piecewise-constant propagation over `tp`; the last element is the endpoint.
pub fn propagate(
    s: &VehicleState,
    u: &ControlInput,
    tp: f64,
    ts: f64,
    p: &VehicleParams,
) -> Result<Vec<VehicleState>, VehicleError> {
    let n = steps_per_propagation(tp, ts)?;
    Ok(propagate_steps(s, u, n, ts, p))
}

/// Time-indexed state sequence; edges are integrated at `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TimedState>,
    pub step: f64,
}

impl Trajectory {
    pub fn new(samples: Vec<TimedState>, step: f64) -> Self {
        Self { samples, step }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Option<&TimedState> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&TimedState> {
        self.samples.last()
    }

    fn edge_steps(&self, i: usize) -> usize {
        let dt = self.samples[i + 1].t - self.samples[i].t;
        (dt / self.step).round().max(1.0) as usize
    }

    /// Every integration substate, starting with the first sample.
    pub fn substates(&self, p: &VehicleParams) -> Vec<TimedState> {
        let Some(first) = self.samples.first() else {
            return Vec::new();
        };
        let mut out = vec![*first];
        for i in 0..self.samples.len().saturating_sub(1) {
            let from = &self.samples[i];
            let u = self.samples[i + 1].input.unwrap_or(ControlInput::ZERO);
            let n = self.edge_steps(i);
            let states = propagate_steps(&from.state, &u, n, self.step, p);
            for (k, s) in states.into_iter().enumerate() {
                out.push(TimedState {
                    state: s,
                    t: from.t + (k + 1) as f64 * self.step,
                    input: Some(u),
                });
            }
        }
        out
    }

    /// Re-integrates the stored inputs from the first sample.
    pub fn replay(&self, p: &VehicleParams) -> Trajectory {
        let mut samples = Vec::with_capacity(self.samples.len());
        let Some(first) = self.samples.first() else {
            return self.clone();
        };
        samples.push(*first);
        for i in 0..self.samples.len() - 1 {
            let u = self.samples[i + 1].input.unwrap_or(ControlInput::ZERO);
            let from = samples[i].state;
            let end = propagate_steps(&from, &u, self.edge_steps(i), self.step, p)
                .pop()
                .unwrap_or(from);
            samples.push(TimedState {
                state: end,
                t: self.samples[i + 1].t,
                input: Some(u),
            });
        }
        Trajectory::new(samples, self.step)
    }

    /// State at absolute time `t`, integrating a partial step when `t` falls between substeps.
    /// Times outside the trajectory clamp to its ends.
    pub fn state_at(&self, t: f64, p: &VehicleParams) -> Option<VehicleState> {
        let first = self.samples.first()?;
        if t <= first.t {
            return Some(first.state);
        }
        let last = self.samples.last()?;
        if t >= last.t {
            return Some(last.state);
        }
        let i = self.samples.partition_point(|s| s.t <= t) - 1;
        let from = &self.samples[i];
        let u = self.samples[i + 1].input.unwrap_or(ControlInput::ZERO);
        let elapsed = t - from.t;
        let full = ((elapsed / self.step) + 1e-9).floor() as usize;
        let mut s = from.state;
        for _ in 0..full {
            s = step(&s, &u, self.step, p);
        }
        let rest = elapsed - full as f64 * self.step;
        if rest > 1e-12 {
            s = step(&s, &u, rest, p);
        }
        Some(s)
    }

    /// Input active at absolute time `t`, if any.
    pub fn input_at(&self, t: f64) -> Option<ControlInput> {
        let i = self.samples.partition_point(|s| s.t <= t);
        if i == 0 || i >= self.samples.len() {
            return None;
        }
        self.samples[i].input
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}
