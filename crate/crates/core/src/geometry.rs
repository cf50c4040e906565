//! Planar primitives used for collision checking and goal membership.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_squared(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Smallest absolute difference between two angles, in [0, pi].
pub fn angle_distance(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let mut area = 0.0;
    for i in 0..n {
        let a = &vertices[i];
        let b = &vertices[(i + 1) % n];
        area += a.x * b.y - b.x * a.y;
    }
    0.5 * area
}

/// Closest point on segment `a`-`b` to `p`, with the segment parameter in [0, 1].
pub fn project_onto_segment(p: &Point2, a: &Point2, b: &Point2) -> (Point2, f64) {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return (*a, 0.0);
    }
    let u = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    (Point2::new(a.x + u * dx, a.y + u * dy), u)
}

fn on_segment(p: &Point2, a: &Point2, b: &Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test; touching and collinear overlap count.
pub fn segments_intersect(p1: &Point2, p2: &Point2, q1: &Point2, q2: &Point2) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

/// Simple polygon with counter-clockwise winding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polygon {
    vertices: Vec<Point2>,
    #[serde(skip)]
    min: Point2,
    #[serde(skip)]
    max: Point2,
}

impl Polygon {
    /// Builds a polygon, reversing the vertex order if it was given clockwise.
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let area = signed_area(&vertices);
        if area == 0.0 {
            return Err(GeometryError::Degenerate);
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            for j in (i + 1)..n {
                // adjacent edges share a vertex
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_intersect(
                    &vertices[i],
                    &vertices[(i + 1) % n],
                    &vertices[j],
                    &vertices[(j + 1) % n],
                ) {
                    return Err(GeometryError::SelfIntersecting);
                }
            }
        }
        Ok(Self::from_ccw_unchecked(vertices))
    }

    /// Caller guarantees a simple counter-clockwise vertex ring.
    pub(crate) fn from_ccw_unchecked(vertices: Vec<Point2>) -> Self {
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &vertices {
            min.x = min.x.min(v.x);
            min.y = min.y.min(v.y);
            max.x = max.x.max(v.x);
            max.y = max.y.max(v.y);
        }
        Self { vertices, min, max }
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        (self.min, self.max)
    }

    fn edges(&self) -> impl Iterator<Item = (&Point2, &Point2)> {
        let n = self.vertices.len();
        (0..n).map(move |i| (&self.vertices[i], &self.vertices[(i + 1) % n]))
    }

    pub fn contains(&self, p: &Point2) -> bool {
        point_in_polygon(p, self)
    }
}

impl<'de> Deserialize<'de> for Polygon {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            vertices: Vec<Point2>,
        }
        let raw = Raw::deserialize(deserializer)?;
        Polygon::new(raw.vertices).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Point2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl OrientedBox {
    pub fn new(center: Point2, heading: f64, length: f64, width: f64) -> Self {
        debug_assert!(length > 0.0 && width > 0.0);
        Self {
            center,
            heading: normalize_angle(heading),
            length,
            width,
        }
    }

    pub fn corners(&self) -> [Point2; 4] {
        let (s, c) = self.heading.sin_cos();
        let hl = 0.5 * self.length;
        let hw = 0.5 * self.width;
        let at = |lx: f64, ly: f64| {
            Point2::new(
                self.center.x + lx * c - ly * s,
                self.center.y + lx * s + ly * c,
            )
        };
        [at(hl, hw), at(-hl, hw), at(-hl, -hw), at(hl, -hw)]
    }

    /// Half-diagonal; any point of the box lies within this radius of the center.
    pub fn circumradius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }
}

pub fn box_to_polygon(b: &OrientedBox) -> Polygon {
    Polygon::from_ccw_unchecked(b.corners().to_vec())
}

/// Ray-casting containment test. Points on the boundary count as inside.
pub fn point_in_polygon(p: &Point2, poly: &Polygon) -> bool {
    if p.x < poly.min.x || p.x > poly.max.x || p.y < poly.min.y || p.y > poly.max.y {
        return false;
    }
    let mut inside = false;
    for (a, b) in poly.edges() {
        if cross(a, b, p) == 0.0 && on_segment(p, a, b) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn polygons_overlap(a: &Polygon, b: &Polygon) -> bool {
    if a.max.x < b.min.x || b.max.x < a.min.x || a.max.y < b.min.y || b.max.y < a.min.y {
        return false;
    }
    if a.vertices.iter().any(|v| point_in_polygon(v, b))
        || b.vertices.iter().any(|v| point_in_polygon(v, a))
    {
        return true;
    }
    a.edges()
        .any(|(p1, p2)| b.edges().any(|(q1, q2)| segments_intersect(p1, p2, q1, q2)))
}

/// Overlap test for two oriented boxes with a circumcircle pre-check.
pub fn boxes_overlap(a: &OrientedBox, b: &OrientedBox) -> bool {
    let reach = a.circumradius() + b.circumradius();
    if a.center.distance_squared(&b.center) > reach * reach {
        return false;
    }
    polygons_overlap(&box_to_polygon(a), &box_to_polygon(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_square() -> Polygon {
        Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    fn shifted(poly: &Polygon, dx: f64, dy: f64) -> Polygon {
        Polygon::new(
            poly.vertices()
                .iter()
                .map(|v| Point2::new(v.x + dx, v.y + dy))
                .collect(),
        )
        .unwrap()
    }

    fn same_ring(actual: &[Point2], expected: &[(f64, f64)]) -> bool {
        let n = expected.len();
        if actual.len() != n {
            return false;
        }
        (0..n).any(|offset| {
            (0..n).all(|i| {
                let a = actual[(i + offset) % n];
                let (ex, ey) = expected[i];
                (a.x - ex).abs() < 1e-12 && (a.y - ey).abs() < 1e-12
            })
        })
    }

    #[test]
    fn axis_aligned_box_corners() {
        let b = OrientedBox::new(Point2::new(0.0, 0.0), 0.0, 4.0, 2.0);
        let poly = box_to_polygon(&b);
        assert!(same_ring(
            poly.vertices(),
            &[(2.0, 1.0), (-2.0, 1.0), (-2.0, -1.0), (2.0, -1.0)]
        ));
        assert!(poly.area() > 0.0);
    }

    #[test]
    fn rotated_box_corners() {
        let b = OrientedBox::new(Point2::new(0.0, 0.0), PI / 2.0, 4.0, 2.0);
        let poly = box_to_polygon(&b);
        assert!(same_ring(
            poly.vertices(),
            &[(-1.0, 2.0), (-1.0, -2.0), (1.0, -2.0), (1.0, 2.0)]
        ));
    }

    #[test]
    fn translated_square_corners() {
        let b = OrientedBox::new(Point2::new(10.0, 5.0), 0.0, 2.0, 2.0);
        let poly = box_to_polygon(&b);
        assert!(same_ring(
            poly.vertices(),
            &[(11.0, 6.0), (9.0, 6.0), (9.0, 4.0), (11.0, 4.0)]
        ));
    }

    #[test]
    fn clockwise_input_is_reversed() {
        let poly = Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(poly.area() > 0.0);
    }

    #[test]
    fn invalid_polygons_rejected() {
        assert_eq!(
            Polygon::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]),
            Err(GeometryError::TooFewVertices(2))
        );
        let bowtie = Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 2.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.0, 1.0),
        ]);
        assert_eq!(bowtie, Err(GeometryError::SelfIntersecting));
    }

    #[test]
    fn containment_examples() {
        let sq = unit_square();
        assert!(point_in_polygon(&Point2::new(0.5, 0.5), &sq));
        assert!(!point_in_polygon(&Point2::new(2.0, 2.0), &sq));
        assert!(point_in_polygon(&Point2::new(1.0, 0.5), &sq));
        assert!(point_in_polygon(&Point2::new(0.0, 0.0), &sq));
    }

    #[test]
    fn overlap_examples() {
        let sq = unit_square();
        assert!(polygons_overlap(&sq, &shifted(&sq, 0.5, 0.0)));
        assert!(!polygons_overlap(&sq, &shifted(&sq, 3.0, 0.0)));
    }

    #[test]
    fn cross_configuration_overlaps() {
        let a = OrientedBox::new(Point2::new(0.0, 0.0), 0.0, 4.0, 1.0);
        let b = OrientedBox::new(Point2::new(0.0, 0.0), PI / 2.0, 4.0, 1.0);
        let pa = box_to_polygon(&a);
        let pb = box_to_polygon(&b);
        // no vertex containment in either direction
        assert!(!pa.vertices().iter().any(|v| point_in_polygon(v, &pb)));
        assert!(!pb.vertices().iter().any(|v| point_in_polygon(v, &pa)));

        // dense sampling oracle: find a point strictly inside both boxes
        let mut shared = 0;
        for i in 0..=80 {
            for j in 0..=80 {
                let p = Point2::new(-2.0 + 0.05 * i as f64, -2.0 + 0.05 * j as f64);
                let in_a = p.x.abs() < 2.0 && p.y.abs() < 0.5;
                let in_b = p.x.abs() < 0.5 && p.y.abs() < 2.0;
                if in_a && in_b {
                    shared += 1;
                }
            }
        }
        assert!(shared > 0);
        assert!(polygons_overlap(&pa, &pb));
        assert!(boxes_overlap(&a, &b));
    }

    #[test]
    fn angle_helpers() {
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((angle_distance(-PI + 0.01, PI - 0.01) - 0.02).abs() < 1e-12);
    }

    fn winding_number(p: &Point2, poly: &[Point2]) -> i32 {
        let n = poly.len();
        let mut wn = 0;
        for i in 0..n {
            let a = &poly[i];
            let b = &poly[(i + 1) % n];
            if a.y <= p.y {
                if b.y > p.y && cross(a, b, p) > 0.0 {
                    wn += 1;
                }
            } else if b.y <= p.y && cross(a, b, p) < 0.0 {
                wn -= 1;
            }
        }
        wn
    }

    fn convex_polygon(center: (f64, f64), radii: Vec<f64>) -> Polygon {
        let n = radii.len();
        let verts = radii
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let a = 2.0 * PI * i as f64 / n as f64;
                Point2::new(center.0 + r * a.cos(), center.1 + r * a.sin())
            })
            .collect::<Vec<_>>();
        // regular-angle star with varying radius, then hull via monotone chain
        let hull = convex_hull(verts);
        Polygon::new(hull).unwrap()
    }

    fn convex_hull(mut pts: Vec<Point2>) -> Vec<Point2> {
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        let mut lower: Vec<Point2> = Vec::new();
        for p in &pts {
            while lower.len() >= 2
                && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0
            {
                lower.pop();
            }
            lower.push(*p);
        }
        let mut upper: Vec<Point2> = Vec::new();
        for p in pts.iter().rev() {
            while upper.len() >= 2
                && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0
            {
                upper.pop();
            }
            upper.push(*p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        lower
    }

    fn axis_rect(x0: f64, y0: f64, w: f64, h: f64) -> Polygon {
        Polygon::new(vec![
            Point2::new(x0, y0),
            Point2::new(x0 + w, y0),
            Point2::new(x0 + w, y0 + h),
            Point2::new(x0, y0 + h),
        ])
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn ray_casting_matches_winding_number(
            cx in -5.0..5.0f64,
            cy in -5.0..5.0f64,
            radii in prop::collection::vec(0.5..3.0f64, 3..9),
            px in -9.0..9.0f64,
            py in -9.0..9.0f64,
        ) {
            let poly = convex_polygon((cx, cy), radii);
            let p = Point2::new(px, py);
            let on_boundary = poly.edges().any(|(a, b)| {
                let (q, _) = project_onto_segment(&p, a, b);
                q.distance(&p) < 1e-9
            });
            prop_assume!(!on_boundary);
            let expected = winding_number(&p, poly.vertices()) != 0;
            prop_assert_eq!(point_in_polygon(&p, &poly), expected);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2_000))]

        #[test]
        fn overlap_symmetric_and_reflexive(
            ax in -5.0..5.0f64, ay in -5.0..5.0f64, ah in -PI..PI, al in 0.5..5.0f64, aw in 0.5..3.0f64,
            bx in -5.0..5.0f64, by in -5.0..5.0f64, bh in -PI..PI, bl in 0.5..5.0f64, bw in 0.5..3.0f64,
        ) {
            let a = box_to_polygon(&OrientedBox::new(Point2::new(ax, ay), ah, al, aw));
            let b = box_to_polygon(&OrientedBox::new(Point2::new(bx, by), bh, bl, bw));
            prop_assert_eq!(polygons_overlap(&a, &b), polygons_overlap(&b, &a));
            prop_assert!(polygons_overlap(&a, &a));
            prop_assert!(polygons_overlap(&b, &b));
        }

        #[test]
        fn axis_rectangles_match_interval_arithmetic(
            x0 in -5.0..5.0f64, y0 in -5.0..5.0f64, w0 in 0.1..4.0f64, h0 in 0.1..4.0f64,
            x1 in -5.0..5.0f64, y1 in -5.0..5.0f64, w1 in 0.1..4.0f64, h1 in 0.1..4.0f64,
        ) {
            let a = axis_rect(x0, y0, w0, h0);
            let b = axis_rect(x1, y1, w1, h1);
            let expected = x0 <= x1 + w1 && x1 <= x0 + w0 && y0 <= y1 + h1 && y1 <= y0 + h0;
            prop_assert_eq!(polygons_overlap(&a, &b), expected);
        }
    }
}
