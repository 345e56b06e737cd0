//! Planar geometry on quadrilaterals: areas, simplicity, convex clipping,
//! IoU and minimum-area rectangles.

use serde::{Deserialize, Serialize};

/// A point in pixel coordinates (x right, y down). Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::new(p[0], p[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Shoelace signed area. Positive for clockwise order on screen (y down).
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

pub fn area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

pub fn perimeter(poly: &[Point]) -> f64 {
    (0..poly.len()).map(|i| poly[i].dist(&poly[(i + 1) % poly.len()])).sum()
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Point, b: Point, p: Point, d: f64| {
        d == 0.0 && p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// True when no two non-adjacent edges of the polygon touch.
pub fn is_simple(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Convex hull (monotone chain), clockwise on screen, no collinear points.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    // Monotone chain yields counter-clockwise in y-up terms, which is
    // positive signed area here, i.e. clockwise on screen.
    lower
}

fn make_positive(mut poly: Vec<Point>) -> Vec<Point> {
    if signed_area(&poly) < 0.0 {
        poly.reverse();
    }
    poly
}

/// Intersection of `subject` with a convex `clip` polygon (Sutherland-Hodgman).
/// A non-convex clip polygon is replaced by its convex hull.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let clip = convex_hull(clip);
    if clip.len() < 3 {
        return Vec::new();
    }
    let clip = make_positive(clip);
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut output);
        let inside = |p: Point| cross(a, b, p) >= 0.0;
        let intersect = |p: Point, q: Point| {
            let dp = cross(a, b, p);
            let dq = cross(a, b, q);
            let t = dp / (dp - dq);
            Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
        };
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            match (inside(prev), inside(cur)) {
                (true, true) => output.push(cur),
                (true, false) => output.push(intersect(prev, cur)),
                (false, true) => {
                    output.push(intersect(prev, cur));
                    output.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    output
}

/// Intersection over union of two polygons (the second is treated as convex).
pub fn iou(a: &[Point], b: &[Point]) -> f64 {
    let inter = area(&clip_convex(a, b));
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Axis-aligned bounding box `(min_x, min_y, max_x, max_y)`.
pub fn bounds(poly: &[Point]) -> (f64, f64, f64, f64) {
    poly.iter().fold(
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
    )
}

/// Axis-aligned rectangle as a clockwise quad starting top-left.
pub fn rect_quad(x0: f64, y0: f64, x1: f64, y1: f64) -> [Point; 4] {
    [
        Point::new(x0, y0),
        Point::new(x1, y0),
        Point::new(x1, y1),
        Point::new(x0, y1),
    ]
}

/// Minimum-area enclosing rectangle of a point set (rotating calipers over
/// the hull edges). Returned clockwise on screen starting from the corner
/// with the smallest `x + y`.
pub fn min_area_rect(points: &[Point]) -> [Point; 4] {
    let hull = convex_hull(points);
    if hull.len() < 3 {
        let (x0, y0, x1, y1) = bounds(points);
        return rect_quad(x0, y0, x1, y1);
    }
    let mut best: Option<(f64, [Point; 4])> = None;
    for i in 0..hull.len() {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        let len = a.dist(&b);
        if len == 0.0 {
            continue;
        }
        let ux = (b.x - a.x) / len;
        let uy = (b.y - a.y) / len;
        let (mut s0, mut s1, mut t0, mut t1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &hull {
            let s = p.x * ux + p.y * uy;
            let t = -p.x * uy + p.y * ux;
            s0 = s0.min(s);
            s1 = s1.max(s);
            t0 = t0.min(t);
            t1 = t1.max(t);
        }
        let rect_area = (s1 - s0) * (t1 - t0);
        if best.as_ref().map_or(true, |(ba, _)| rect_area < *ba - 1e-9) {
            let corner = |s: f64, t: f64| Point::new(s * ux - t * uy, s * uy + t * ux);
            let quad = [corner(s0, t0), corner(s1, t0), corner(s1, t1), corner(s0, t1)];
            best = Some((rect_area, quad));
        }
    }
    order_clockwise(best.map(|(_, q)| q).expect("hull has edges"))
}

/// Reorders four corners clockwise on screen, starting at the smallest `x + y`.
pub fn order_clockwise(mut quad: [Point; 4]) -> [Point; 4] {
    if signed_area(&quad) < 0.0 {
        quad.reverse();
    }
    let start = (0..4)
        .min_by(|&i, &j| {
            (quad[i].x + quad[i].y)
                .total_cmp(&(quad[j].x + quad[j].y))
                .then(quad[i].y.total_cmp(&quad[j].y))
        })
        .unwrap();
    quad.rotate_left(start);
    quad
}

/// Offsets a convex polygon outward by `distance` along edge normals.
pub fn offset_convex(poly: &[Point], distance: f64) -> Vec<Point> {
    let poly = make_positive(poly.to_vec());
    let n = poly.len();
    // Outward normal of edge a->b for positive (screen-clockwise) orientation.
    let normal = |a: Point, b: Point| {
        let len = a.dist(&b).max(1e-12);
        Point::new((b.y - a.y) / len, -(b.x - a.x) / len)
    };
    let shifted: Vec<(Point, Point)> = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let nv = normal(a, b);
            (
                Point::new(a.x + distance * nv.x, a.y + distance * nv.y),
                Point::new(b.x + distance * nv.x, b.y + distance * nv.y),
            )
        })
        .collect();
    (0..n)
        .map(|i| {
            let (p1, p2) = shifted[(i + n - 1) % n];
            let (q1, q2) = shifted[i];
            line_intersection(p1, p2, q1, q2).unwrap_or(q1)
        })
        .collect()
}

fn line_intersection(p1: Point, p2: Point, q1: Point, q2: Point) -> Option<Point> {
    let d = (p2.x - p1.x) * (q2.y - q1.y) - (p2.y - p1.y) * (q2.x - q1.x);
    if d.abs() < 1e-12 {
        return None;
    }
    let t = ((q1.x - p1.x) * (q2.y - q1.y) - (q1.y - p1.y) * (q2.x - q1.x)) / d;
    Some(Point::new(p1.x + t * (p2.x - p1.x), p1.y + t * (p2.y - p1.y)))
}
