//! Lane geometry, the lane-deviation penalty grid and goal regions along the route.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::RoadError;
use crate::geometry::{angle_distance, project_onto_segment, Point2, Polygon};
use crate::vehicle::VehicleState;

mod point_pairs {
    use super::Point2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(points: &[Point2], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = points.iter().map(|p| [p.x, p.y]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Point2>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[x, y]| Point2::new(x, y)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: String,
    pub width: f64,
    #[serde(with = "point_pairs")]
    pub centerline: Vec<Point2>,
    #[serde(default)]
    pub successors: Vec<String>,
}

/// Open polyline with cumulative arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Point2>,
    arc: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolylineProjection {
    pub point: Point2,
    pub distance: f64,
    pub s: f64,
    pub segment: usize,
}

impl Polyline {
    pub fn new(points: Vec<Point2>) -> Self {
        let mut arc = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                acc += points[i - 1].distance(p);
            }
            arc.push(acc);
        }
        Self { points, arc }
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        self.arc.last().copied().unwrap_or(0.0)
    }

    pub fn project(&self, p: &Point2) -> PolylineProjection {
        self.project_window(p, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Projection restricted to segments overlapping arc lengths `[s0, s1]`.
    pub fn project_window(&self, p: &Point2, s0: f64, s1: f64) -> PolylineProjection {
        let mut best = PolylineProjection {
            point: self.points[0],
            distance: f64::INFINITY,
            s: 0.0,
            segment: 0,
        };
        for i in 0..self.points.len().saturating_sub(1) {
            if self.arc[i + 1] < s0 || self.arc[i] > s1 {
                continue;
            }
            let (q, u) = project_onto_segment(p, &self.points[i], &self.points[i + 1]);
            let d = q.distance(p);
            if d < best.distance {
                best = PolylineProjection {
                    point: q,
                    distance: d,
                    s: self.arc[i] + u * (self.arc[i + 1] - self.arc[i]),
                    segment: i,
                };
            }
        }
        best
    }

    fn segment_at(&self, s: f64) -> usize {
        let i = self.arc.partition_point(|&a| a <= s);
        i.saturating_sub(1).min(self.points.len().saturating_sub(2))
    }

    /// Point at arc length `s`, clamped to the polyline ends.
    pub fn point_at(&self, s: f64) -> Point2 {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        let len = self.arc[i + 1] - self.arc[i];
        let u = if len > 0.0 {
            (s - self.arc[i]) / len
        } else {
            0.0
        };
        let a = self.points[i];
        let b = self.points[i + 1];
        Point2::new(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y))
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let i = self.segment_at(s.clamp(0.0, self.length()));
        let a = self.points[i];
        let b = self.points[i + 1];
        (b.y - a.y).atan2(b.x - a.x)
    }

    /// Vertices between arc lengths `s0 < s1`, including both interpolated ends.
    pub fn slice(&self, s0: f64, s1: f64) -> Vec<Point2> {
        let s0 = s0.clamp(0.0, self.length());
        let s1 = s1.clamp(0.0, self.length());
        let mut out = vec![self.point_at(s0)];
        for (p, &a) in self.points.iter().zip(&self.arc) {
            if a > s0 + 1e-9 && a < s1 - 1e-9 {
                out.push(*p);
            }
        }
        out.push(self.point_at(s1));
        out
    }
}

/// Closest lane-center point to a query position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneCenterHit {
    pub point: Point2,
    pub distance: f64,
    pub lane: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RoadNetworkRaw {
    lanes: Vec<Lane>,
    route: Vec<String>,
}

/// Lanes plus the ordered route the ego follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RoadNetworkRaw", into = "RoadNetworkRaw")]
pub struct RoadNetwork {
    lanes: Vec<Lane>,
    route: Vec<String>,
    lane_lines: Vec<Polyline>,
    route_line: Polyline,
    // (route arc length where the lane starts, lane index)
    route_spans: Vec<(f64, usize)>,
    max_width: f64,
}

impl TryFrom<RoadNetworkRaw> for RoadNetwork {
    type Error = RoadError;

    fn try_from(raw: RoadNetworkRaw) -> Result<Self, RoadError> {
        RoadNetwork::new(raw.lanes, raw.route)
    }
}

impl From<RoadNetwork> for RoadNetworkRaw {
    fn from(net: RoadNetwork) -> Self {
        RoadNetworkRaw {
            lanes: net.lanes,
            route: net.route,
        }
    }
}

impl RoadNetwork {
    pub fn new(lanes: Vec<Lane>, route: Vec<String>) -> Result<Self, RoadError> {
        if lanes.is_empty() {
            return Err(RoadError::EmptyNetwork);
        }
        let mut index = HashMap::new();
        for (i, lane) in lanes.iter().enumerate() {
            let invalid = |field, reason: &str| RoadError::InvalidLane {
                index: i,
                id: lane.id.clone(),
                field,
                reason: reason.to_string(),
            };
            if !(lane.width > 0.0 && lane.width.is_finite()) {
                return Err(invalid("width", "must be a positive number"));
            }
            if lane.centerline.len() < 2 {
                return Err(invalid("centerline", "needs at least 2 points"));
            }
            if lane.centerline.iter().any(|p| !p.is_finite()) {
                return Err(invalid("centerline", "has non-finite coordinates"));
            }
            if lane.centerline.windows(2).any(|w| w[0] == w[1]) {
                return Err(invalid("centerline", "has repeated consecutive points"));
            }
            if index.insert(lane.id.clone(), i).is_some() {
                return Err(RoadError::DuplicateLane(lane.id.clone()));
            }
        }
        for lane in &lanes {
            if let Some(bad) = lane.successors.iter().find(|s| !index.contains_key(*s)) {
                return Err(RoadError::UnknownLane(bad.clone()));
            }
        }
        if route.is_empty() {
            return Err(RoadError::EmptyRoute);
        }
        let mut route_idx = Vec::with_capacity(route.len());
        for id in &route {
            route_idx.push(
                *index
                    .get(id)
                    .ok_or_else(|| RoadError::UnknownLane(id.clone()))?,
            );
        }
        for w in route_idx.windows(2) {
            if !lanes[w[0]].successors.contains(&lanes[w[1]].id) {
                return Err(RoadError::DisconnectedRoute {
                    from: lanes[w[0]].id.clone(),
                    to: lanes[w[1]].id.clone(),
                });
            }
        }

        let lane_lines = lanes
            .iter()
            .map(|l| Polyline::new(l.centerline.clone()))
            .collect();
        let mut route_points: Vec<Point2> = Vec::new();
        let mut route_spans = Vec::with_capacity(route_idx.len());
        let mut acc = 0.0;
        for &li in &route_idx {
            let pts = &lanes[li].centerline;
            let skip = match route_points.last() {
                Some(last) if last.distance(&pts[0]) < 1e-6 => 1,
                Some(last) => {
                    acc += last.distance(&pts[0]);
                    0
                }
                None => 0,
            };
            route_spans.push((acc, li));
            for w in pts.windows(2) {
                acc += w[0].distance(&w[1]);
            }
            route_points.extend_from_slice(&pts[skip..]);
        }
        let max_width = lanes.iter().map(|l| l.width).fold(0.0, f64::max);
        Ok(Self {
            lanes,
            route,
            lane_lines,
            route_line: Polyline::new(route_points),
            route_spans,
            max_width,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn route(&self) -> &[String] {
        &self.route
    }

    pub fn lane_line(&self, lane: usize) -> &Polyline {
        &self.lane_lines[lane]
    }

    pub fn lane_index(&self, id: &str) -> Option<usize> {
        self.lanes.iter().position(|l| l.id == id)
    }

    pub fn route_line(&self) -> &Polyline {
        &self.route_line
    }

    pub fn route_length(&self) -> f64 {
        self.route_line.length()
    }

    pub fn max_width(&self) -> f64 {
        self.max_width
    }

    /// Arc length of the projection of `p` onto the route.
    pub fn route_progress(&self, p: &Point2) -> f64 {
        self.route_line.project(p).s
    }

    /// Route progress of `p`, searching only near the arc length `hint`.
    /// Keeps a moving point on its own stretch where the route passes close to itself.
    pub fn route_progress_near(&self, p: &Point2, hint: f64, back: f64, ahead: f64) -> f64 {
        let near = self.route_line.project_window(p, hint - back, hint + ahead);
        if near.distance.is_finite() {
            near.s
        } else {
            self.route_progress(p)
        }
    }

    /// Index of the route lane covering route arc length `s`.
    pub fn route_lane_at(&self, s: f64) -> usize {
        let i = self.route_spans.partition_point(|(start, _)| *start <= s);
        self.route_spans[i.saturating_sub(1)].1
    }

    /// Lane-center point `distance` ahead of the projection of `p`, with the route heading there.
    /// `None` when the route ends first.
    pub fn lookahead(&self, p: &Point2, distance: f64) -> Option<(Point2, f64)> {
        let s = self.route_progress(p) + distance;
        if s > self.route_length() {
            return None;
        }
        Some((self.route_line.point_at(s), self.route_line.heading_at(s)))
    }

    pub fn nearest_lane_center(&self, p: &Point2) -> LaneCenterHit {
        let mut best = LaneCenterHit {
            point: self.lanes[0].centerline[0],
            distance: f64::INFINITY,
            lane: 0,
        };
        for (li, line) in self.lane_lines.iter().enumerate() {
            let proj = line.project(p);
            if proj.distance < best.distance {
                best = LaneCenterHit {
                    point: proj.point,
                    distance: proj.distance,
                    lane: li,
                };
            }
        }
        best
    }
}

/// Closest lane-center point over every lane of the network.
pub fn nearest_lane_center(net: &RoadNetwork, p: &Point2) -> (Point2, f64, String) {
    let hit = net.nearest_lane_center(p);
    (hit.point, hit.distance, net.lanes[hit.lane].id.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub min: Point2,
    pub max: Point2,
}

impl GridBounds {
    /// Bounding box of every lane, widened by the lane half-width plus `margin`,
    /// snapped outward to multiples of `resolution`.
    pub fn around(net: &RoadNetwork, margin: f64, resolution: f64) -> Self {
        let pad = 0.5 * net.max_width + margin;
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in net.lanes.iter().flat_map(|l| &l.centerline) {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        let snap_down = |v: f64| ((v - pad) / resolution).floor() * resolution;
        let snap_up = |v: f64| ((v + pad) / resolution).ceil() * resolution;
        Self {
            min: Point2::new(snap_down(min.x), snap_down(min.y)),
            max: Point2::new(snap_up(max.x), snap_up(max.y)),
        }
    }
}

/// Rasterized lane-deviation penalty field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyGrid {
    pub origin: Point2,
    pub resolution: f64,
    pub cols: usize,
    pub rows: usize,
    pub cells: Vec<f64>,
    pub max_penalty: f64,
    pub invalid_penalty: f64,
}

/// Linear lane-deviation penalty, saturating at `max_penalty` from half the lane width.
pub fn lane_penalty(distance: f64, width: f64, max_penalty: f64) -> f64 {
    if distance < 0.5 * width {
        2.0 * max_penalty * distance / width
    } else {
        max_penalty
    }
}

pub fn build_penalty_grid(
    net: &RoadNetwork,
    bounds: &GridBounds,
    resolution: f64,
    max_penalty: f64,
    invalid_penalty: f64,
) -> Result<PenaltyGrid, RoadError> {
    if !(resolution > 0.0) {
        return Err(RoadError::NonPositiveResolution(resolution));
    }
    if !(invalid_penalty <= max_penalty && max_penalty > 0.0) {
        return Err(RoadError::InvalidGrid(format!(
            "invalid-state penalty {invalid_penalty} must not exceed the maximum {max_penalty}"
        )));
    }
    let cols = ((bounds.max.x - bounds.min.x) / resolution).ceil().max(1.0) as usize;
    let rows = ((bounds.max.y - bounds.min.y) / resolution).ceil().max(1.0) as usize;
    let origin = bounds.min;
    let mut best_dist = vec![f64::INFINITY; cols * rows];
    let mut best_width = vec![1.0; cols * rows];
    let reach = 0.5 * net.max_width + resolution;

    // Cells farther than the widest half-lane from every centerline saturate anyway,
    // so each segment only needs to visit its own inflated bounding box.
    for (li, lane) in net.lanes.iter().enumerate() {
        let pts = net.lane_lines[li].points();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let c0 = ((a.x.min(b.x) - reach - origin.x) / resolution)
                .floor()
                .max(0.0) as usize;
            let c1 = (((a.x.max(b.x) + reach - origin.x) / resolution).ceil() as isize)
                .clamp(0, cols as isize) as usize;
            let r0 = ((a.y.min(b.y) - reach - origin.y) / resolution)
                .floor()
                .max(0.0) as usize;
            let r1 = (((a.y.max(b.y) + reach - origin.y) / resolution).ceil() as isize)
                .clamp(0, rows as isize) as usize;
            for row in r0..r1 {
                for col in c0..c1 {
                    let center = Point2::new(
                        origin.x + (col as f64 + 0.5) * resolution,
                        origin.y + (row as f64 + 0.5) * resolution,
                    );
                    let (q, _) = project_onto_segment(&center, &a, &b);
                    let d = q.distance(&center);
                    let k = row * cols + col;
                    if d < best_dist[k] {
                        best_dist[k] = d;
                        best_width[k] = lane.width;
                    }
                }
            }
        }
    }
    let cells = best_dist
        .iter()
        .zip(&best_width)
        .map(|(&d, &w)| lane_penalty(d, w, max_penalty))
        .collect();
    Ok(PenaltyGrid {
        origin,
        resolution,
        cols,
        rows,
        cells,
        max_penalty,
        invalid_penalty,
    })
}

impl PenaltyGrid {
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.origin.x) / self.resolution).floor();
        let r = ((y - self.origin.y) / self.resolution).floor();
        if c < 0.0
            || r < 0.0
            || c >= self.cols as f64
            || r >= self.rows as f64
            || c.is_nan()
            || r.is_nan()
        {
            return None;
        }
        Some((c as usize, r as usize))
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Point2 {
        Point2::new(
            self.origin.x + (col as f64 + 0.5) * self.resolution,
            self.origin.y + (row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cell(&self, col: usize, row: usize) -> f64 {
        self.cells[row * self.cols + col]
    }

    /// Penalty of the containing cell; outside the grid returns the maximum.
    pub fn lookup(&self, x: f64, y: f64) -> f64 {
        match self.cell_of(x, y) {
            Some((c, r)) => self.cell(c, r),
            None => self.max_penalty,
        }
    }

    /// Lane-invalid positions: penalty at or above the invalid-state threshold.
    pub fn is_lane_invalid(&self, x: f64, y: f64) -> bool {
        self.lookup(x, y) >= self.invalid_penalty
    }
}

pub fn lookup_penalty(grid: &PenaltyGrid, x: f64, y: f64) -> f64 {
    grid.lookup(x, y)
}

/// Lateral band across the road at a fixed route distance ahead of the ego.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalRegion {
    pub lanes: Vec<String>,
    pub window: [f64; 2],
    pub polygons: Vec<Polygon>,
}

impl GoalRegion {
    pub fn contains(&self, p: &Point2) -> bool {
        self.polygons.iter().any(|poly| poly.contains(p))
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (lo, hi) in self.polygons.iter().map(Polygon::bounding_box) {
            min.x = min.x.min(lo.x);
            min.y = min.y.min(lo.y);
            max.x = max.x.max(hi.x);
            max.y = max.y.max(hi.y);
        }
        (min, max)
    }

    pub fn centroid(&self) -> Point2 {
        let (lo, hi) = self.bounding_box();
        Point2::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y))
    }
}

// Interior band vertices closer than this to a neighbour are dropped; on curves a
// sliver segment would fold the inner offset edge over itself.
const BAND_MIN_SPACING: f64 = 0.2;

fn band_polygon(center: &[Point2], half_widths: &[f64]) -> Result<Polygon, RoadError> {
    let last = center.len() - 1;
    let mut keep: Vec<usize> = vec![0];
    for i in 1..last {
        let prev = center[*keep.last().expect("starts non-empty")];
        if center[i].distance(&prev) >= BAND_MIN_SPACING
            && center[i].distance(&center[last]) >= BAND_MIN_SPACING
        {
            keep.push(i);
        }
    }
    keep.push(last);
    let center: Vec<Point2> = keep.iter().map(|&i| center[i]).collect();
    let half_widths: Vec<f64> = keep.iter().map(|&i| half_widths[i]).collect();
    let n = center.len();
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for i in 0..n {
        let a = center[i.saturating_sub(1)];
        let b = center[(i + 1).min(n - 1)];
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len = dx.hypot(dy).max(1e-12);
        let (nx, ny) = (-dy / len, dx / len);
        let h = half_widths[i];
        left.push(Point2::new(center[i].x + nx * h, center[i].y + ny * h));
        right.push(Point2::new(center[i].x - nx * h, center[i].y - ny * h));
    }
    right.reverse();
    let mut ring = right;
    ring.extend(left);
    Ok(Polygon::new(ring)?)
}

const PARALLEL_TOLERANCE: f64 = 15.0 * std::f64::consts::PI / 180.0;

pub fn compute_goal_region(
    net: &RoadNetwork,
    ego: &VehicleState,
    goal_distance: f64,
    goal_threshold: f64,
) -> Result<GoalRegion, RoadError> {
    if !(goal_threshold > 0.0) {
        return Err(RoadError::NonPositiveGoalThreshold(goal_threshold));
    }
    let route = &net.route_line;
    let s_ego = route.project(&ego.position()).s;
    let s_mid = s_ego + goal_distance;
    if s_mid > route.length() {
        return Err(RoadError::RouteExhausted {
            needed: s_mid,
            available: route.length(),
        });
    }
    let s_lo = (s_mid - goal_threshold).max(0.0);
    let s_hi = (s_mid + goal_threshold).min(route.length());

    let center = route.slice(s_lo, s_hi);
    let half_widths: Vec<f64> = center
        .iter()
        .map(|p| 0.5 * net.lanes[net.route_lane_at(route.project(p).s)].width)
        .collect();
    let mut polygons = vec![band_polygon(&center, &half_widths)?];

    let route_lane = net.route_lane_at(s_mid);
    let mut included: Vec<(usize, Point2, f64)> =
        vec![(route_lane, route.point_at(s_mid), route.heading_at(s_mid))];
    let mut members: HashSet<usize> = net
        .route
        .iter()
        .filter_map(|id| net.lane_index(id))
        .collect();
    let mut lane_ids = vec![net.lanes[route_lane].id.clone()];

    // grow sideways through lanes running alongside an already included lane
    let mut cursor = 0;
    while cursor < included.len() {
        let (ref_lane, ref_point, ref_heading) = included[cursor];
        cursor += 1;
        for (li, lane) in net.lanes.iter().enumerate() {
            if members.contains(&li) {
                continue;
            }
            let line = &net.lane_lines[li];
            let proj = line.project(&ref_point);
            let heading = line.heading_at(proj.s);
            let dh = angle_distance(heading, ref_heading);
            // oncoming lanes are not part of the goal
            let parallel = dh <= PARALLEL_TOLERANCE;
            let side_by_side = 0.5 * (lane.width + net.lanes[ref_lane].width);
            let adjacent = (proj.distance - side_by_side).abs()
                <= 0.25 * lane.width.max(net.lanes[ref_lane].width);
            if !(parallel && adjacent) {
                continue;
            }
            members.insert(li);
            lane_ids.push(lane.id.clone());
            let pts = line.slice(proj.s - goal_threshold, proj.s + goal_threshold);
            if pts.len() >= 2 && pts[0].distance(&pts[pts.len() - 1]) > 1e-6 {
                let hw = vec![0.5 * lane.width; pts.len()];
                polygons.push(band_polygon(&pts, &hw)?);
            }
            included.push((li, proj.point, heading));
        }
    }

    Ok(GoalRegion {
        lanes: lane_ids,
        window: [s_lo, s_hi],
        polygons,
    })
}

/// Position membership only; heading and speed are unconstrained.
pub fn in_goal(region: &GoalRegion, s: &VehicleState) -> bool {
    region.contains(&s.position())
}
