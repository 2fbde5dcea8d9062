//! Planar primitives: poses, convex regions, the region map, boundary frames
//! and exact propagation of the unicycle dynamics
//!
//! ```text
//! x' = v sin(theta),  y' = v cos(theta),  theta' = u,  |u| <= v / r
//! ```
//!
//! Headings are measured from the +y axis, so a heading of zero moves "up"
//! and a positive turn rate rotates the heading clockwise (towards +x).

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used by [`RegionMap::locate`] to decide that a point is on an edge.
pub const LOCATE_TOL: f64 = 1e-9;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Smallest signed difference `a - b`, wrapped into `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }
}

/// Planar pose. `theta` is measured from the +y axis; velocity direction is
/// `(sin theta, cos theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Configuration {
    /// Builds a pose with the heading normalized into `(-pi, pi]`.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// Unit velocity direction.
    pub fn heading(&self) -> Point {
        Point::new(self.theta.sin(), self.theta.cos())
    }

    /// Reflection across the y-axis: `(x, y, theta) -> (-x, y, -theta)`.
    pub fn mirrored(&self) -> Self {
        Self::new(-self.x, self.y, -self.theta)
    }

    pub fn position_error(&self, other: &Configuration) -> f64 {
        self.position().dist(other.position())
    }

    pub fn heading_error(&self, other: &Configuration) -> f64 {
        angle_diff(self.theta, other.theta).abs()
    }
}

/// Kind of a path piece. The derived ordering (`C-` < `C+` < `L`) is the
/// tie-breaking order used when comparing words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    /// Counter-clockwise arc, `u = -u_max`.
    #[serde(rename = "C-")]
    CMinus,
    /// Clockwise arc, `u = +u_max`.
    #[serde(rename = "C+")]
    CPlus,
    /// Straight line, `u = 0`.
    #[serde(rename = "L")]
    Line,
}

impl SegmentKind {
    /// Sign of the angular-rate input for this kind.
    pub fn turn_sign(self) -> f64 {
        match self {
            SegmentKind::CMinus => -1.0,
            SegmentKind::CPlus => 1.0,
            SegmentKind::Line => 0.0,
        }
    }

    pub fn is_arc(self) -> bool {
        self != SegmentKind::Line
    }

    pub fn mirrored(self) -> Self {
        match self {
            SegmentKind::CMinus => SegmentKind::CPlus,
            SegmentKind::CPlus => SegmentKind::CMinus,
            SegmentKind::Line => SegmentKind::Line,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            SegmentKind::CMinus => "C-",
            SegmentKind::CPlus => "C+",
            SegmentKind::Line => "L",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "C-" => Some(SegmentKind::CMinus),
            "C+" => Some(SegmentKind::CPlus),
            "L" => Some(SegmentKind::Line),
            _ => None,
        }
    }
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Closed-form endpoint of the dynamics under a constant input
/// `u in {+u_max, 0, -u_max}` held for `duration`.
pub fn propagate(
    c: &Configuration,
    kind: SegmentKind,
    duration: f64,
    v: f64,
    u_max: f64,
) -> Result<Configuration> {
    if duration < 0.0 || duration.is_nan() {
        return Err(Error::NegativeDuration(duration));
    }
    Ok(propagate_unchecked(c, kind, duration, v, u_max))
}

pub(crate) fn propagate_unchecked(
    c: &Configuration,
    kind: SegmentKind,
    duration: f64,
    v: f64,
    u_max: f64,
) -> Configuration {
    match kind {
        SegmentKind::Line => {
            let d = duration * v;
            Configuration {
                x: c.x + d * c.theta.sin(),
                y: c.y + d * c.theta.cos(),
                theta: c.theta,
            }
        }
        _ => {
            let s = kind.turn_sign();
            let r = v / u_max;
            let th1 = c.theta + s * u_max * duration;
            // Subtract the sines/cosines via product formulas to keep short arcs accurate.
            let half = 0.5 * (th1 - c.theta);
            let mid = 0.5 * (th1 + c.theta);
            let dcos = -2.0 * mid.sin() * half.sin(); // cos th1 - cos th0
            let dsin = 2.0 * mid.cos() * half.sin(); // sin th1 - sin th0
            Configuration {
                x: c.x - s * r * dcos,
                y: c.y + s * r * dsin,
                theta: normalize_angle(th1),
            }
        }
    }
}

/// Propagation parametrized by arclength and turning radius.
pub fn propagate_length(c: &Configuration, kind: SegmentKind, length: f64, r: f64) -> Configuration {
    propagate_unchecked(c, kind, length, 1.0, 1.0 / r)
}

/// Centre of the turning circle of radius `r` used by an arc of `kind` leaving `c`.
pub fn turn_center(c: &Configuration, kind: SegmentKind, r: f64) -> Point {
    let s = kind.turn_sign();
    Point::new(c.x + s * r * c.theta.cos(), c.y - s * r * c.theta.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionId(pub u32);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Convex polygonal region with its own speed and minimum turning radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: RegionId,
    /// Counter-clockwise vertices.
    pub polygon: Vec<Point>,
    pub v: f64,
    pub r: f64,
}

impl Region {
    pub fn new(id: RegionId, polygon: Vec<Point>, v: f64, r: f64) -> Result<Self> {
        let bad = |reason: &str| Error::InvalidRegion {
            id,
            reason: reason.to_string(),
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(bad("speed must be positive"));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(bad("turning radius must be positive"));
        }
        let n = polygon.len();
        if n < 3 {
            return Err(bad("polygon needs at least three vertices"));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if polygon[i].dist(polygon[j]) <= LOCATE_TOL {
                    return Err(bad("repeated vertex"));
                }
            }
        }
        let area: f64 = (0..n)
            .map(|i| polygon[i].cross(polygon[(i + 1) % n]))
            .sum::<f64>()
            * 0.5;
        if area <= 0.0 {
            return Err(bad("vertices must be counter-clockwise with nonempty interior"));
        }
        for i in 0..n {
            let a = polygon[i];
            let b = polygon[(i + 1) % n];
            let c = polygon[(i + 2) % n];
            let turn = b.sub(a).cross(c.sub(b));
            if turn < -1e-12 * (1.0 + b.sub(a).norm() * c.sub(b).norm()) {
                return Err(bad("polygon is not convex"));
            }
        }
        Ok(Self { id, polygon, v, r })
    }

    /// Angular-rate bound `v / r`.
    pub fn u_max(&self) -> f64 {
        self.v / self.r
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.polygon.len();
        (0..n).map(move |i| (self.polygon[i], self.polygon[(i + 1) % n]))
    }

    /// Outward unit normals with the offset `d` such that the edge line is `n.p = d`.
    pub fn half_planes(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.edges().map(|(a, b)| {
            let e = b.sub(a);
            let len = e.norm();
            let n = Point::new(e.y / len, -e.x / len);
            (n, n.dot(a))
        })
    }

    /// Largest signed distance from the point to the edge lines (positive outside).
    pub fn signed_distance(&self, p: Point) -> f64 {
        self.half_planes()
            .map(|(n, d)| n.dot(p) - d)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.signed_distance(p) <= tol
    }

    /// Earliest time in `(0, horizon]` at which motion of `kind` from `c`
    /// leaves the region through an edge, with the edge index.
    ///
    /// Roots are found in closed form; grazing contacts are not exits.
    pub fn first_exit(&self, c: &Configuration, kind: SegmentKind, horizon: f64) -> Option<(f64, usize)> {
        let v = self.v;
        let u = self.u_max();
        let eps = 1e-12;
        let mut best: Option<(f64, usize)> = None;
        for (idx, (n, d)) in self.half_planes().enumerate() {
            let mut roots = [f64::NAN; 2];
            if kind == SegmentKind::Line {
                let rate = v * n.dot(c.heading());
                if rate > 0.0 {
                    roots[0] = (d - n.dot(c.position())) / rate;
                }
            } else {
                let s = kind.turn_sign();
                let center = turn_center(c, kind, self.r);
                // On the circle n.p - d = (n.center - d) + s r cos(theta - gamma).
                let gamma = n.y.atan2(-n.x);
                let k = -s * (n.dot(center) - d) / self.r;
                if k.abs() < 1.0 {
                    let a = k.acos();
                    for (slot, root) in [gamma + a, gamma - a].into_iter().enumerate() {
                        // Leaving requires d/dt (n.p) = -r u sin(theta - gamma) > 0.
                        if (root - gamma).sin() >= 0.0 {
                            continue;
                        }
                        let mut t = (s * (root - c.theta)).rem_euclid(std::f64::consts::TAU) / u;
                        if t <= eps {
                            t += std::f64::consts::TAU / u;
                        }
                        roots[slot] = t;
                    }
                }
            }
            for t in roots {
                if t > eps && t <= horizon && best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, idx));
                }
            }
        }
        best
    }


    /// Maximum signed distance outside the polygon reached by a path piece
    /// (negative when the piece stays strictly inside).
    pub fn piece_excursion(&self, start: &Configuration, kind: SegmentKind, length: f64, r: f64) -> f64 {
        match kind {
            SegmentKind::Line => {
                let end = propagate_length(start, kind, length, r);
                self.signed_distance(start.position())
                    .max(self.signed_distance(end.position()))
            }
            _ => {
                let s = kind.turn_sign();
                let center = turn_center(start, kind, r);
                let sweep = length / r;
                let end = propagate_length(start, kind, length, r);
                let mut worst = f64::NEG_INFINITY;
                for (n, d) in self.half_planes() {
                    // Point on the arc at heading th is center + s r (-cos th, sin th);
                    // its projection on n peaks at th = beta (C+) or beta + pi (C-).
                    let beta = n.y.atan2(-n.x);
                    let target = if s > 0.0 { beta } else { beta + PI };
                    let delta = (s * (target - start.theta)).rem_euclid(TAU);
                    let m = if delta <= sweep {
                        n.dot(center) - d + r
                    } else {
                        (n.dot(start.position()) - d).max(n.dot(end.position()) - d)
                    };
                    worst = worst.max(m);
                }
                worst
            }
        }
    }
}

/// Shared boundary segment between two adjacent regions. `a`'s interior lies
/// to the left of `from -> to`, `b`'s to the right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adjacency {
    pub a: RegionId,
    pub b: RegionId,
    pub from: Point,
    pub to: Point,
}

impl Adjacency {
    pub fn length(&self) -> f64 {
        self.from.dist(self.to)
    }

    pub fn joins(&self, p: RegionId, q: RegionId) -> bool {
        (self.a == p && self.b == q) || (self.a == q && self.b == p)
    }

    /// Segment oriented so that region `into` lies to its left.
    pub fn oriented_towards(&self, into: RegionId) -> (Point, Point) {
        if into == self.a {
            (self.from, self.to)
        } else {
            (self.to, self.from)
        }
    }
}

/// Result of point location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Region(RegionId),
    Boundary(RegionId, RegionId),
    Outside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    regions: Vec<Region>,
    adjacency: Vec<Adjacency>,
}

impl RegionMap {
    /// Validates the partition (disjoint interiors, connected union) and
    /// derives the edge-sharing adjacency.
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::InvalidMap("no regions".into()));
        }
        for (i, a) in regions.iter().enumerate() {
            for b in &regions[i + 1..] {
                if a.id == b.id {
                    return Err(Error::InvalidMap(format!("duplicate region id {}", a.id)));
                }
                if interiors_overlap(a, b) {
                    return Err(Error::InvalidMap(format!(
                        "regions {} and {} overlap (interiors must be disjoint)",
                        a.id, b.id
                    )));
                }
            }
        }
        let mut adjacency = Vec::new();
        for (i, a) in regions.iter().enumerate() {
            for b in &regions[i + 1..] {
                if let Some((from, to)) = shared_segment(a, b) {
                    adjacency.push(Adjacency {
                        a: a.id,
                        b: b.id,
                        from,
                        to,
                    });
                }
            }
        }
        let map = Self { regions, adjacency };
        if !map.is_connected() {
            return Err(Error::InvalidMap(
                "union of regions is not connected through shared edges".into(),
            ));
        }
        Ok(map)
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn adjacency(&self) -> &[Adjacency] {
        &self.adjacency
    }

    pub fn region(&self, id: RegionId) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    pub fn shared_edge(&self, p: RegionId, q: RegionId) -> Option<&Adjacency> {
        self.adjacency.iter().find(|a| a.joins(p, q))
    }

    pub fn neighbors(&self, id: RegionId) -> impl Iterator<Item = RegionId> + '_ {
        self.adjacency.iter().filter_map(move |a| {
            if a.a == id {
                Some(a.b)
            } else if a.b == id {
                Some(a.a)
            } else {
                None
            }
        })
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![self.regions[0].id];
        let mut queue = VecDeque::from([self.regions[0].id]);
        while let Some(id) = queue.pop_front() {
            for n in self.neighbors(id) {
                if !seen.contains(&n) {
                    seen.push(n);
                    queue.push_back(n);
                }
            }
        }
        seen.len() == self.regions.len()
    }

    /// Point location with [`LOCATE_TOL`].
    pub fn locate(&self, p: Point) -> Location {
        let inside: Vec<&Region> = self
            .regions
            .iter()
            .filter(|r| r.contains(p, LOCATE_TOL))
            .collect();
        match inside.len() {
            0 => Location::Outside,
            1 => Location::Region(inside[0].id),
            _ => {
                for adj in &self.adjacency {
                    if point_on_segment(p, adj.from, adj.to, LOCATE_TOL) {
                        let (a, b) = if adj.a <= adj.b { (adj.a, adj.b) } else { (adj.b, adj.a) };
                        return Location::Boundary(a, b);
                    }
                }
                let mut ids: Vec<RegionId> = inside.iter().map(|r| r.id).collect();
                ids.sort();
                Location::Boundary(ids[0], ids[1])
            }
        }
    }

    /// Applies `f` to every vertex; used for rigid-motion and scaling checks.
    pub fn map_vertices(&self, f: impl Fn(Point) -> Point, mirror: bool) -> Result<Self> {
        let regions = self
            .regions
            .iter()
            .map(|r| {
                let mut poly: Vec<Point> = r.polygon.iter().map(|&p| f(p)).collect();
                if mirror {
                    poly.reverse();
                }
                Region::new(r.id, poly, r.v, r.r)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(regions)
    }

    pub fn with_region_params(&self, f: impl Fn(&Region) -> (f64, f64)) -> Result<Self> {
        let regions = self
            .regions
            .iter()
            .map(|r| {
                let (v, rr) = f(r);
                Region::new(r.id, r.polygon.clone(), v, rr)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(regions)
    }

    /// Axis-aligned bounding box `(min, max)` of all regions.
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in self.regions.iter().flat_map(|r| r.polygon.iter()) {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }
}

fn point_on_segment(p: Point, a: Point, b: Point, tol: f64) -> bool {
    let e = b.sub(a);
    let len = e.norm();
    let t = p.sub(a).dot(e) / len;
    let off = e.cross(p.sub(a)).abs() / len;
    off <= tol && t >= -tol && t <= len + tol
}

fn interiors_overlap(a: &Region, b: &Region) -> bool {
    let tol = 1e-9;
    let separated_by = |n: Point| {
        let (amin, amax) = project(&a.polygon, n);
        let (bmin, bmax) = project(&b.polygon, n);
        amax <= bmin + tol || bmax <= amin + tol
    };
    !a.half_planes()
        .chain(b.half_planes())
        .any(|(n, _)| separated_by(n))
}

fn project(poly: &[Point], n: Point) -> (f64, f64) {
    poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = n.dot(*p);
        (lo.min(d), hi.max(d))
    })
}

/// Overlap of antiparallel collinear edges of `a` and `b`, oriented along `a`'s edge.
fn shared_segment(a: &Region, b: &Region) -> Option<(Point, Point)> {
    let tol = 1e-9;
    for (p0, p1) in a.edges() {
        let e = p1.sub(p0);
        let len = e.norm();
        let dir = e.scale(1.0 / len);
        for (q0, q1) in b.edges() {
            let off0 = dir.cross(q0.sub(p0)).abs();
            let off1 = dir.cross(q1.sub(p0)).abs();
            if off0 > tol || off1 > tol || q1.sub(q0).dot(dir) >= 0.0 {
                continue;
            }
            let t0 = q0.sub(p0).dot(dir);
            let t1 = q1.sub(p0).dot(dir);
            let lo = t0.min(t1).max(0.0);
            let hi = t0.max(t1).min(len);
            if hi - lo > tol {
                return Some((p0.add(dir.scale(lo)), p0.add(dir.scale(hi))));
            }
        }
    }
    None
}

/// Local frame at a boundary crossing: the anchor maps to the origin, the
/// boundary tangent to the x'-axis and its left normal to +y'.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFrame {
    pub anchor: Point,
    /// Angle of the boundary tangent, counter-clockwise from +x.
    pub phi: f64,
}

impl BoundaryFrame {
    pub fn new(anchor: Point, phi: f64) -> Self {
        Self { anchor, phi }
    }

    /// Frame at `anchor` on the segment `from -> to`; the left side of the
    /// segment becomes the +y' half-plane.
    pub fn on_segment(anchor: Point, from: Point, to: Point) -> Self {
        let e = to.sub(from);
        Self::new(anchor, e.y.atan2(e.x))
    }

    pub fn identity() -> Self {
        Self::new(Point::default(), 0.0)
    }

    /// Unit tangent `(cos phi, sin phi)` in world coordinates.
    pub fn tangent(&self) -> Point {
        Point::new(self.phi.cos(), self.phi.sin())
    }

    /// Unit normal (the frame's +y') in world coordinates.
    pub fn normal(&self) -> Point {
        Point::new(-self.phi.sin(), self.phi.cos())
    }

    /// World heading that points along the frame normal rotated by `theta_frame`.
    pub fn world_heading(&self, theta_frame: f64) -> f64 {
        normalize_angle(theta_frame - self.phi)
    }
}

/// Rotation by the boundary angle plus translation of the anchor to the origin.
pub fn to_boundary_frame(c: &Configuration, f: &BoundaryFrame) -> Configuration {
    let (s, co) = f.phi.sin_cos();
    let (ax, ay) = (f.anchor.x, f.anchor.y);
    Configuration::new(
        co * c.x + s * c.y - (ax * co + ay * s),
        -s * c.x + co * c.y - (-ax * s + ay * co),
        c.theta + f.phi,
    )
}

/// Exact inverse of [`to_boundary_frame`].
pub fn from_boundary_frame(c: &Configuration, f: &BoundaryFrame) -> Configuration {
    let (s, co) = f.phi.sin_cos();
    Configuration::new(
        co * c.x - s * c.y + f.anchor.x,
        s * c.x + co * c.y + f.anchor.y,
        c.theta - f.phi,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(id: u32, x0: f64, y0: f64, x1: f64, y1: f64, v: f64, r: f64) -> Region {
        Region::new(
            RegionId(id),
            vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
            v,
            r,
        )
        .unwrap()
    }

    fn two_halves() -> RegionMap {
        RegionMap::new(vec![
            square(1, -10.0, 0.0, 10.0, 10.0, 1.0, 1.0),
            square(2, -10.0, -10.0, 10.0, 0.0, 2.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn locate_interior_edge_outside() {
        let m = two_halves();
        assert_eq!(m.locate(Point::new(0.0, 3.0)), Location::Region(RegionId(1)));
        assert_eq!(
            m.locate(Point::new(2.0, 0.0)),
            Location::Boundary(RegionId(1), RegionId(2))
        );
        assert_eq!(m.locate(Point::new(0.0, 30.0)), Location::Outside);
        // outer edge of a single region stays with that region
        assert_eq!(m.locate(Point::new(10.0, 5.0)), Location::Region(RegionId(1)));
    }

    #[test]
    fn adjacency_is_detected_with_partial_overlap() {
        let m = RegionMap::new(vec![
            square(1, -4.0, 0.0, 0.0, 4.0, 1.0, 1.0),
            square(3, -4.0, -4.0, 0.0, 0.0, 1.0, 1.0),
            square(2, 0.0, -4.0, 4.0, 4.0, 1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(m.adjacency().len(), 3);
        let e12 = m.shared_edge(RegionId(1), RegionId(2)).unwrap();
        assert_abs_diff_eq!(e12.length(), 4.0, epsilon = 1e-12);
        let (from, to) = e12.oriented_towards(RegionId(2));
        // region 2 lies to the left of from -> to
        let mid = from.add(to).scale(0.5);
        let left = Point::new(-(to.y - from.y), to.x - from.x);
        let probe = mid.add(left.scale(0.01));
        assert_eq!(m.locate(probe), Location::Region(RegionId(2)));
    }

    #[test]
    fn overlapping_regions_are_rejected() {
        let err = RegionMap::new(vec![
            square(1, 0.0, 0.0, 2.0, 2.0, 1.0, 1.0),
            square(2, 1.0, 1.0, 3.0, 3.0, 1.0, 1.0),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::InvalidMap(ref m) if m.contains("overlap")));
    }

    #[test]
    fn disconnected_regions_are_rejected() {
        let err = RegionMap::new(vec![
            square(1, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0),
            square(2, 2.0, 0.0, 3.0, 1.0, 1.0, 1.0),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::InvalidMap(_)));
    }

    #[test]
    fn invalid_polygons_are_rejected() {
        let cw = Region::new(
            RegionId(1),
            vec![Point::new(0.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 0.0)],
            1.0,
            1.0,
        );
        assert!(cw.is_err());
        let concave = Region::new(
            RegionId(1),
            vec![
                Point::new(0.0, 0.0),
                Point::new(2.0, 0.0),
                Point::new(1.0, 0.5),
                Point::new(2.0, 2.0),
                Point::new(0.0, 2.0),
            ],
            1.0,
            1.0,
        );
        assert!(concave.is_err());
        assert!(Region::new(RegionId(1), vec![Point::new(0.0, 0.0); 3], 1.0, 1.0).is_err());
        assert!(square_result(0.0).is_err());
    }

    fn square_result(v: f64) -> Result<Region> {
        Region::new(
            RegionId(1),
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(0.0, 1.0),
            ],
            v,
            1.0,
        )
    }

    #[test]
    fn u_max_is_speed_over_radius() {
        let r = square(1, 0.0, 0.0, 1.0, 1.0, 3.0, 1.5);
        assert_eq!(r.u_max(), 2.0);
    }

    #[test]
    fn propagate_examples() {
        let o = Configuration::new(0.0, 0.0, 0.0);
        let l = propagate(&o, SegmentKind::Line, 3.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(l.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l.y, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l.theta, 0.0);

        let half = propagate(&o, SegmentKind::CPlus, PI, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(half.x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(half.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(half.theta, PI, epsilon = 1e-12);

        let full = propagate(&o, SegmentKind::CMinus, TAU, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(full.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(full.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(full.theta.sin(), 0.0, epsilon = 1e-12);

        assert_eq!(
            propagate(&o, SegmentKind::Line, -1.0, 1.0, 1.0),
            Err(Error::NegativeDuration(-1.0))
        );
    }

    #[test]
    fn boundary_frame_examples() {
        let c = Configuration::new(1.5, -2.0, 0.7);
        let id = to_boundary_frame(&c, &BoundaryFrame::identity());
        assert_abs_diff_eq!(id.x, c.x);
        assert_abs_diff_eq!(id.y, c.y);
        assert_abs_diff_eq!(id.theta, c.theta);

        // A pose at the anchor heading along the boundary normal maps to (0,0,0).
        let f = BoundaryFrame::new(Point::new(2.0, -1.0), 0.4);
        let at = Configuration::new(2.0, -1.0, -0.4);
        let mapped = to_boundary_frame(&at, &f);
        assert_abs_diff_eq!(mapped.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mapped.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mapped.theta, 0.0, epsilon = 1e-15);

        // The boundary itself maps onto y' = 0.
        let along = Configuration::new(2.0 + 3.0 * 0.4f64.cos(), -1.0 + 3.0 * 0.4f64.sin(), 0.0);
        assert_abs_diff_eq!(to_boundary_frame(&along, &f).y, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn boundary_frame_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let f = BoundaryFrame::new(
                Point::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)),
                rng.gen_range(-PI..PI),
            );
            let c = Configuration::new(
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-PI..PI),
            );
            let back = from_boundary_frame(&to_boundary_frame(&c, &f), &f);
            assert!(back.position_error(&c) <= 1e-12, "{c:?} -> {back:?}");
            assert!(back.heading_error(&c) <= 1e-12);
        }
    }

    /// Classical RK4 on the raw dynamics; independent of the closed form.
    fn rk4(c: &Configuration, u: f64, v: f64, t: f64, steps: usize) -> Configuration {
        let f = |s: [f64; 3]| [v * s[2].sin(), v * s[2].cos(), u];
        let h = t / steps as f64;
        let mut s = [c.x, c.y, c.theta];
        for _ in 0..steps {
            let k1 = f(s);
            let k2 = f([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1], s[2] + 0.5 * h * k1[2]]);
            let k3 = f([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1], s[2] + 0.5 * h * k2[2]]);
            let k4 = f([s[0] + h * k3[0], s[1] + h * k3[1], s[2] + h * k3[2]]);
            for i in 0..3 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        Configuration::new(s[0], s[1], s[2])
    }

    fn kind_strategy() -> impl Strategy<Value = SegmentKind> {
        prop_oneof![
            Just(SegmentKind::CMinus),
            Just(SegmentKind::CPlus),
            Just(SegmentKind::Line)
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn propagate_is_additive(
            x in -20.0..20.0f64, y in -20.0..20.0f64, th in -PI..PI,
            kind in kind_strategy(), t1 in 0.0..5.0f64, t2 in 0.0..5.0f64,
            v in 0.1..4.0f64, r in 0.1..4.0f64,
        ) {
            let c = Configuration::new(x, y, th);
            let u = v / r;
            let once = propagate(&c, kind, t1 + t2, v, u).unwrap();
            let mid = propagate(&c, kind, t1, v, u).unwrap();
            let twice = propagate(&mid, kind, t2, v, u).unwrap();
            prop_assert!(once.position_error(&twice) <= 1e-12 * (1.0 + (t1 + t2) * v));
            prop_assert!(once.heading_error(&twice) <= 1e-12);
        }

        #[test]
        fn propagate_matches_rk4(
            th in -PI..PI, kind in kind_strategy(), v in 0.1..4.0f64, r in 0.1..4.0f64,
        ) {
            let c = Configuration::new(0.3, -0.2, th);
            let u = kind.turn_sign() * v / r;
            let exact = propagate(&c, kind, 1.0, v, v / r).unwrap();
            let num = rk4(&c, u, v, 1.0, 2000);
            prop_assert!(exact.position_error(&num) <= 1e-8);
            prop_assert!(exact.heading_error(&num) <= 1e-8);
        }

        #[test]
        fn mirror_commutes_with_propagate(
            x in -20.0..20.0f64, y in -20.0..20.0f64, th in -PI..PI,
            kind in kind_strategy(), t in 0.0..5.0f64, v in 0.1..4.0f64, r in 0.1..4.0f64,
        ) {
            let c = Configuration::new(x, y, th);
            let a = propagate(&c, kind, t, v, v / r).unwrap().mirrored();
            let b = propagate(&c.mirrored(), kind.mirrored(), t, v, v / r).unwrap();
            prop_assert!(a.position_error(&b) <= 1e-11);
            prop_assert!(a.heading_error(&b) <= 1e-12);
        }
    }

    #[test]
    fn arc_excursion_matches_sampling() {
        let region = square(1, -3.0, -2.0, 4.0, 5.0, 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let c = Configuration::new(
                rng.gen_range(-2.0..3.0),
                rng.gen_range(-1.0..4.0),
                rng.gen_range(-PI..PI),
            );
            let kind = if rng.gen_bool(0.5) { SegmentKind::CPlus } else { SegmentKind::CMinus };
            let r = rng.gen_range(0.2..3.0);
            let len = rng.gen_range(0.0..TAU * r);
            let fast = region.piece_excursion(&c, kind, len, r);
            let sampled = (0..=4000)
                .map(|i| {
                    let p = propagate_length(&c, kind, len * i as f64 / 4000.0, r);
                    region.signed_distance(p.position())
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(fast >= sampled - 1e-12);
            assert!(fast - sampled <= 1e-5 * r, "fast {fast} sampled {sampled}");
        }
    }
}
