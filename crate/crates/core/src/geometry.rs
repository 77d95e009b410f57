//! Polygonal domains, visibility queries and the support sets of field
//! components.
//!
//! Boundary rings are stored with the domain interior on the left of every
//! edge: the outer ring runs counterclockwise and holes run clockwise. All
//! intersection and containment tests use a tolerance proportional to the
//! scene diameter (`Domain::eps`). Contacts within that tolerance of an edge
//! endpoint are *grazing*; grazing contacts never block a segment.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::utd::WedgeLocalFrame;

/// Relative geometric tolerance; multiplied by the scene diameter.
pub const EPS_GEOM_REL: f64 = 1e-9;

/// Angular tolerance (radians) for sector and flat-vertex tests.
pub const EPS_ANGLE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x1: 0.0, x2: 0.0 };

    pub const fn new(x1: f64, x2: f64) -> Self {
        Point2 { x1, x2 }
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        Point2::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x1 * o.x1 + self.x2 * o.x2
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x1 * o.x2 - self.x2 * o.x1
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    /// Angle with the positive x1-axis, in (-π, π].
    pub fn angle(self) -> f64 {
        self.x2.atan2(self.x1)
    }

    pub fn lerp(self, o: Point2, s: f64) -> Point2 {
        self + (o - self) * s
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x1 * s, self.x2 * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x1, -self.x2)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x1, self.x2)
    }
}

/// Wraps an angle into [0, 2π).
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// Sound-hard wall.
    Neumann,
    /// Sound-soft wall.
    Dirichlet,
}

impl BoundaryCondition {
    /// Reflection sign: +1 for Neumann, -1 for Dirichlet.
    pub fn sign(self) -> f64 {
        match self {
            BoundaryCondition::Neumann => 1.0,
            BoundaryCondition::Dirichlet => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: Point2,
    pub b: Point2,
    pub bc: BoundaryCondition,
    pub index: usize,
    /// `false` for edges that only truncate an unbounded domain; those never
    /// block rays and never generate events.
    pub physical: bool,
}

impl Edge {
    pub fn point_at(&self, s: f64) -> Point2 {
        self.a.lerp(self.b, s)
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    /// Signed distance of `p` from the supporting line, positive on the
    /// interior (left) side.
    pub fn signed_distance(&self, p: Point2) -> f64 {
        (self.b - self.a).cross(p - self.a) / self.length()
    }

    /// Angle of the edge direction with the x1-axis.
    pub fn angle(&self) -> f64 {
        (self.b - self.a).angle()
    }

    /// Distance from `p` to the sub-segment `[s0, s1]` of the edge.
    pub fn distance_to_piece(&self, p: Point2, s0: f64, s1: f64) -> f64 {
        let u = self.point_at(s0);
        let v = self.point_at(s1);
        point_segment_distance(p, u, v)
    }
}

pub fn point_segment_distance(p: Point2, u: Point2, v: Point2) -> f64 {
    let d = v - u;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return p.dist(u);
    }
    let s = ((p - u).dot(d) / len2).clamp(0.0, 1.0);
    p.dist(u + d * s)
}

/// A diffracting corner of the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexInfo {
    pub position: Point2,
    pub index: usize,
    /// (incoming edge, outgoing edge) in ring order.
    pub adjacent_edges: (usize, usize),
    /// Angle measured outside the domain between the two adjacent edges.
    pub exterior_angle: f64,
}

/// Every ring corner, including flat and truncation corners.
#[derive(Clone, Copy, Debug)]
struct Corner {
    position: Point2,
    incoming: usize,
    outgoing: usize,
    exterior_angle: f64,
    physical: bool,
}

/// Closed parameter interval `[lo, hi]` along an edge, `0 ≤ lo ≤ hi ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, s: f64, slack: f64) -> bool {
        s >= self.lo - slack && s <= self.hi + slack
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportKind {
    Source,
    Reflection,
    Diffraction,
}

/// Spatial support of a field component.
///
/// `Source` and `Diffraction` supports are the points visible from `center`.
/// A `Reflection` support is the set of points reached by segments from the
/// image point `center` that cross `edge` inside one of `lit_intervals` and
/// then stay inside the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportDescriptor {
    pub kind: SupportKind,
    pub center: Point2,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lit_intervals: Vec<Interval>,
}

impl SupportDescriptor {
    pub fn source(center: Point2) -> Self {
        SupportDescriptor {
            kind: SupportKind::Source,
            center,
            edge: None,
            lit_intervals: Vec::new(),
        }
    }

    pub fn diffraction(center: Point2) -> Self {
        SupportDescriptor {
            kind: SupportKind::Diffraction,
            center,
            edge: None,
            lit_intervals: Vec::new(),
        }
    }

    pub fn reflection(center: Point2, edge: usize, lit_intervals: Vec<Interval>) -> Self {
        SupportDescriptor {
            kind: SupportKind::Reflection,
            center,
            edge: Some(edge),
            lit_intervals,
        }
    }
}

/// Result of [`segments_intersect`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentHit {
    pub point: Point2,
    /// The contact happens within tolerance of an endpoint of either segment,
    /// or the segments are collinear.
    pub grazing: bool,
}

/// Intersection of the segment `(p, q)` with edge `e`, with length tolerance
/// `eps`.
pub fn segments_intersect(p: Point2, q: Point2, e: &Edge, eps: f64) -> Option<SegmentHit> {
    let r = q - p;
    let s = e.b - e.a;
    let rl = r.norm();
    let sl = s.norm();
    if rl == 0.0 || sl == 0.0 {
        return None;
    }
    let denom = r.cross(s);
    let ap = e.a - p;
    // sin of the angle between the two segments
    if denom.abs() <= 1e-14 * rl * sl {
        // parallel: only collinear overlaps count
        if (r.cross(ap) / rl).abs() > eps {
            return None;
        }
        let t0 = ap.dot(r) / (rl * rl);
        let t1 = (e.b - p).dot(r) / (rl * rl);
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        let tol = eps / rl;
        if hi < -tol || lo > 1.0 + tol {
            return None;
        }
        let t = lo.max(0.0);
        return Some(SegmentHit {
            point: p + r * t,
            grazing: true,
        });
    }
    let t = ap.cross(s) / denom;
    let u = ap.cross(r) / denom;
    let tt = eps / rl;
    let tu = eps / sl;
    if t < -tt || t > 1.0 + tt || u < -tu || u > 1.0 + tu {
        return None;
    }
    let grazing = t <= tt || t >= 1.0 - tt || u <= tu || u >= 1.0 - tu;
    Some(SegmentHit {
        point: p + r * t,
        grazing,
    })
}

/// Mirror image of `p` across the line through `line.0` and `line.1`.
pub fn reflect_point(line: (Point2, Point2), p: Point2) -> Result<Point2> {
    let d = line.1 - line.0;
    let len2 = d.dot(d);
    if !(len2 > 0.0) || !len2.is_finite() {
        return Err(Error::Degenerate(
            "reflection line through coincident points".into(),
        ));
    }
    let s = (p - line.0).dot(d) / len2;
    let foot = line.0 + d * s;
    Ok(foot * 2.0 - p)
}

/// Polygonal domain: an outer ring with optional holes.
#[derive(Clone, Debug)]
pub struct Domain {
    pub outer: Vec<Point2>,
    pub holes: Vec<Vec<Point2>>,
    pub edges: Vec<Edge>,
    pub vertices: Vec<VertexInfo>,
    /// The outer ring truncates an unbounded region.
    pub unbounded: bool,
    /// Absolute geometric tolerance.
    pub eps: f64,
    corners: Vec<Corner>,
    diameter: f64,
}

/// One boundary ring with a boundary condition per edge; edge `i` joins
/// point `i` to point `i + 1`. `physical[i] == false` marks truncation edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub points: Vec<Point2>,
    pub bcs: Vec<BoundaryCondition>,
    pub physical: Vec<bool>,
}

impl Ring {
    pub fn new(points: Vec<Point2>, bcs: Vec<BoundaryCondition>) -> Self {
        let physical = vec![true; points.len()];
        Ring {
            points,
            bcs,
            physical,
        }
    }

    pub fn uniform(points: Vec<Point2>, bc: BoundaryCondition) -> Self {
        let n = points.len();
        Ring::new(points, vec![bc; n])
    }

    fn signed_area(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| self.points[i].cross(self.points[(i + 1) % n]))
            .sum::<f64>()
            / 2.0
    }

    /// Reverses traversal direction while keeping every edge's attributes.
    fn reversed(&self) -> Ring {
        let n = self.points.len();
        let points: Vec<Point2> = (0..n).map(|j| self.points[n - 1 - j]).collect();
        // new edge j runs old point n-1-j -> n-2-j, i.e. old edge n-2-j
        let map = |j: usize| (2 * n - 2 - j) % n;
        Ring {
            points,
            bcs: (0..n).map(|j| self.bcs[map(j)]).collect(),
            physical: (0..n).map(|j| self.physical[map(j)]).collect(),
        }
    }
}

impl Domain {
    /// Builds a domain from an outer ring and holes. Rings are reoriented
    /// as needed so that the interior lies on the left of every edge.
    pub fn new(outer: Ring, holes: Vec<Ring>, unbounded: bool) -> Result<Domain> {
        let mut rings = Vec::with_capacity(1 + holes.len());
        for (k, ring) in std::iter::once(outer).chain(holes).enumerate() {
            if ring.points.len() < 3 {
                return Err(Error::InvalidDomain(format!(
                    "ring {k} has fewer than 3 points"
                )));
            }
            if ring.bcs.len() != ring.points.len() || ring.physical.len() != ring.points.len() {
                return Err(Error::InvalidDomain(format!(
                    "ring {k}: {} points but {} boundary conditions",
                    ring.points.len(),
                    ring.bcs.len()
                )));
            }
            if let Some(p) = ring.points.iter().find(|p| !p.is_finite()) {
                return Err(Error::InvalidDomain(format!(
                    "ring {k}: non-finite point {p}"
                )));
            }
            let area = ring.signed_area();
            let want_ccw = k == 0;
            rings.push(if (area > 0.0) == want_ccw {
                ring
            } else {
                ring.reversed()
            });
        }

        let (mut lo, mut hi) = (rings[0].points[0], rings[0].points[0]);
        for p in rings.iter().flat_map(|r| r.points.iter()) {
            lo = Point2::new(lo.x1.min(p.x1), lo.x2.min(p.x2));
            hi = Point2::new(hi.x1.max(p.x1), hi.x2.max(p.x2));
        }
        let diameter = lo.dist(hi);
        let eps = EPS_GEOM_REL * diameter.max(1e-300);

        let mut edges = Vec::new();
        let mut corners = Vec::new();
        for ring in &rings {
            let n = ring.points.len();
            let base = edges.len();
            for i in 0..n {
                edges.push(Edge {
                    a: ring.points[i],
                    b: ring.points[(i + 1) % n],
                    bc: ring.bcs[i],
                    index: base + i,
                    physical: ring.physical[i],
                });
            }
            for i in 0..n {
                let incoming = base + (i + n - 1) % n;
                let outgoing = base + i;
                let din = edges[incoming].b - edges[incoming].a;
                let dout = edges[outgoing].b - edges[outgoing].a;
                let turn = din.cross(dout).atan2(din.dot(dout));
                corners.push(Corner {
                    position: ring.points[i],
                    incoming,
                    outgoing,
                    exterior_angle: PI + turn,
                    physical: edges[incoming].physical && edges[outgoing].physical,
                });
            }
        }

        for e in &edges {
            if e.length() <= eps {
                return Err(Error::InvalidDomain(format!(
                    "edge {} is degenerate",
                    e.index
                )));
            }
        }

        let domain_rings: Vec<Vec<Point2>> = rings.iter().map(|r| r.points.clone()).collect();
        let mut domain = Domain {
            outer: domain_rings[0].clone(),
            holes: domain_rings[1..].to_vec(),
            edges,
            vertices: Vec::new(),
            unbounded,
            eps,
            corners,
            diameter,
        };
        domain.validate()?;

        domain.vertices = domain
            .corners
            .iter()
            .filter(|c| c.physical && (c.exterior_angle - PI).abs() > EPS_ANGLE)
            .enumerate()
            .map(|(index, c)| VertexInfo {
                position: c.position,
                index,
                adjacent_edges: (c.incoming, c.outgoing),
                exterior_angle: c.exterior_angle,
            })
            .collect();
        Ok(domain)
    }

    /// Simple polygon with one boundary condition per edge.
    pub fn polygon(points: Vec<Point2>, bcs: Vec<BoundaryCondition>) -> Result<Domain> {
        Domain::new(Ring::new(points, bcs), Vec::new(), false)
    }

    /// Unbounded wedge with exterior angle `alpha`, truncated by the square
    /// `[-half_width, half_width]²`.
    ///
    /// The source sits at the origin; the wedge vertex lies at `distance`
    /// from it. The reference face leaves the vertex along the +x1 axis and
    /// the incidence angle `theta` is measured counterclockwise from it.
    pub fn wedge(
        alpha: f64,
        theta: f64,
        distance: f64,
        bc: BoundaryCondition,
        half_width: f64,
    ) -> Result<Domain> {
        if !(alpha > 0.0 && alpha < TAU) {
            return Err(Error::InvalidDomain(format!(
                "wedge exterior angle {alpha} outside (0, 2π)"
            )));
        }
        let opening = TAU - alpha;
        if !(theta > 0.0 && theta < opening) {
            return Err(Error::InvalidDomain(format!(
                "incidence angle {theta} outside (0, {opening})"
            )));
        }
        if !(distance > 0.0 && half_width > distance) {
            return Err(Error::InvalidDomain(
                "wedge vertex must lie inside the truncation box".into(),
            ));
        }
        let vertex = -Point2::from_polar(distance, theta);
        let exit = |dir: Point2| {
            let mut t = f64::INFINITY;
            for (c, d) in [(vertex.x1, dir.x1), (vertex.x2, dir.x2)] {
                if d > 0.0 {
                    t = t.min((half_width - c) / d);
                } else if d < 0.0 {
                    t = t.min((-half_width - c) / d);
                }
            }
            vertex + dir * t
        };
        let e0 = exit(Point2::new(1.0, 0.0));
        let e1 = exit(Point2::from_polar(1.0, opening));
        let a0 = wrap_angle(e0.angle());
        let a1 = wrap_angle(e1.angle());
        let span = wrap_angle(a1 - a0);
        let l = half_width;
        let mut box_corners: Vec<(f64, Point2)> = [
            Point2::new(l, -l),
            Point2::new(l, l),
            Point2::new(-l, l),
            Point2::new(-l, -l),
        ]
        .into_iter()
        .map(|c| (wrap_angle(c.angle() - a0), c))
        .filter(|(rel, _)| *rel > 0.0 && *rel < span)
        .collect();
        box_corners.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut points = vec![vertex, e0];
        let mut physical = vec![true];
        for (_, c) in box_corners {
            if c.dist(*points.last().unwrap()) > 1e-12 * l {
                points.push(c);
                physical.push(false);
            }
        }
        if e1.dist(*points.last().unwrap()) > 1e-12 * l {
            points.push(e1);
            physical.push(false);
        }
        physical.push(true);
        let n = points.len();
        let ring = Ring {
            points,
            bcs: vec![bc; n],
            physical,
        };
        Domain::new(ring, Vec::new(), true)
    }

    /// Free space, truncated by a non-physical square.
    pub fn free_space(half_width: f64) -> Result<Domain> {
        let l = half_width;
        let pts = vec![
            Point2::new(-l, -l),
            Point2::new(l, -l),
            Point2::new(l, l),
            Point2::new(-l, l),
        ];
        let ring = Ring {
            points: pts,
            bcs: vec![BoundaryCondition::Neumann; 4],
            physical: vec![false; 4],
        };
        Domain::new(ring, Vec::new(), true)
    }

    /// Boundary rings in stored orientation (outer first).
    pub fn rings(&self) -> Vec<Ring> {
        let mut out = Vec::with_capacity(1 + self.holes.len());
        let mut base = 0;
        for pts in std::iter::once(&self.outer).chain(self.holes.iter()) {
            let edges = &self.edges[base..base + pts.len()];
            out.push(Ring {
                points: pts.clone(),
                bcs: edges.iter().map(|e| e.bc).collect(),
                physical: edges.iter().map(|e| e.physical).collect(),
            });
            base += pts.len();
        }
        out
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Axis-aligned bounding box `(min, max)` of the boundary.
    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = self.outer[0];
        let mut hi = self.outer[0];
        for p in self.outer.iter().chain(self.holes.iter().flatten()) {
            lo = Point2::new(lo.x1.min(p.x1), lo.x2.min(p.x2));
            hi = Point2::new(hi.x1.max(p.x1), hi.x2.max(p.x2));
        }
        (lo, hi)
    }

    pub fn physical_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.physical)
    }

    fn validate(&self) -> Result<()> {
        let ne = self.edges.len();
        for i in 0..ne {
            for j in (i + 1)..ne {
                let (ei, ej) = (&self.edges[i], &self.edges[j]);
                let adjacent = ei.b == ej.a || ej.b == ei.a;
                if adjacent {
                    // only a folded-back overlap is invalid
                    let shared = if ei.b == ej.a { ei.b } else { ei.a };
                    let u = if ei.b == ej.a { ei.a } else { ei.b };
                    let v = if ei.b == ej.a { ej.b } else { ej.a };
                    let (du, dv) = (u - shared, v - shared);
                    if du.cross(dv).abs() <= 1e-12 * du.norm() * dv.norm() && du.dot(dv) > 0.0 {
                        return Err(Error::InvalidDomain(format!("edges {i} and {j} overlap")));
                    }
                    continue;
                }
                if segments_intersect(ei.a, ei.b, ej, self.eps).is_some() {
                    return Err(Error::InvalidDomain(format!("edges {i} and {j} intersect")));
                }
            }
        }
        for (k, hole) in self.holes.iter().enumerate() {
            if let Some(p) = hole.iter().find(|p| !point_in_ring(**p, &self.outer)) {
                return Err(Error::InvalidDomain(format!(
                    "hole {k} has point {p} outside the outer boundary"
                )));
            }
            for (m, other) in self.holes.iter().enumerate() {
                if m != k && hole.iter().any(|p| point_in_ring(*p, other)) {
                    return Err(Error::InvalidDomain(format!("holes {k} and {m} overlap")));
                }
            }
        }
        Ok(())
    }

    /// Closed-domain membership.
    pub fn contains(&self, p: Point2) -> bool {
        if !p.is_finite() {
            return false;
        }
        if self
            .edges
            .iter()
            .any(|e| point_segment_distance(p, e.a, e.b) <= self.eps)
        {
            return true;
        }
        point_in_ring(p, &self.outer) && !self.holes.iter().any(|h| point_in_ring(p, h))
    }

    /// Whether `p` lies strictly inside, farther than `margin` from every edge.
    pub fn contains_interior(&self, p: Point2, margin: f64) -> bool {
        point_in_ring(p, &self.outer)
            && !self.holes.iter().any(|h| point_in_ring(p, h))
            && self
                .edges
                .iter()
                .all(|e| point_segment_distance(p, e.a, e.b) > margin)
    }

    pub fn segments_intersect(&self, p: Point2, q: Point2, e: &Edge) -> Option<SegmentHit> {
        segments_intersect(p, q, e, self.eps)
    }

    /// True iff the open segment `(p, q)` crosses no physical edge.
    pub fn is_visible(&self, p: Point2, q: Point2) -> bool {
        self.is_visible_excluding(p, q, None)
    }

    fn is_visible_excluding(&self, p: Point2, q: Point2, skip: Option<usize>) -> bool {
        let len = p.dist(q);
        if len <= self.eps {
            return true;
        }
        for e in self.physical_edges() {
            if Some(e.index) == skip {
                continue;
            }
            if let Some(hit) = segments_intersect(p, q, e, self.eps) {
                if !hit.grazing {
                    return false;
                }
            }
        }
        // a segment passing exactly through a corner is blocked when it
        // enters the exterior there
        let dir = (q - p) * (1.0 / len);
        for c in self.corners.iter().filter(|c| c.physical) {
            let along = (c.position - p).dot(dir);
            if along <= self.eps || along >= len - self.eps {
                continue;
            }
            if dir.cross(c.position - p).abs() > self.eps {
                continue;
            }
            if self.strictly_exterior(c, dir) || self.strictly_exterior(c, -dir) {
                return false;
            }
        }
        true
    }

    /// Local angle of `dir` at a corner, measured counterclockwise from the
    /// outgoing edge; the interior sector is `(0, 2π - α)`.
    fn sector_angle(&self, c: &Corner, dir: Point2) -> f64 {
        wrap_angle(dir.angle() - self.edges[c.outgoing].angle())
    }

    fn strictly_exterior(&self, c: &Corner, dir: Point2) -> bool {
        let phi = self.sector_angle(c, dir);
        let opening = TAU - c.exterior_angle;
        phi > opening + EPS_ANGLE && phi < TAU - EPS_ANGLE
    }

    fn corner_of_vertex(&self, v: &VertexInfo) -> &Corner {
        self.corners
            .iter()
            .find(|c| c.incoming == v.adjacent_edges.0 && c.outgoing == v.adjacent_edges.1)
            .expect("vertex corner")
    }

    /// Parameter intervals of edge `target` lying in the closure of `support`.
    pub fn lit_intervals(&self, support: &SupportDescriptor, target: usize) -> Vec<Interval> {
        let e = &self.edges[target];
        if !e.physical || support.edge == Some(target) {
            return Vec::new();
        }
        let c = support.center;
        // the wave must arrive from the interior side
        if e.signed_distance(c) <= self.eps {
            return Vec::new();
        }

        let mut lit: Vec<Interval> = match support.kind {
            SupportKind::Source | SupportKind::Diffraction => vec![Interval::new(0.0, 1.0)],
            SupportKind::Reflection => {
                let win = &self.edges[support.edge.expect("reflection support has an edge")];
                let mut pieces = Vec::new();
                for iv in &support.lit_intervals {
                    let (p0, p1) = (win.point_at(iv.lo), win.point_at(iv.hi));
                    let range = clip_cone(e, (0.0, 1.0), c, p0, p1)
                        .and_then(|r| clip_far_side(e, r, c, win.a, win.b));
                    if let Some((lo, hi)) = range {
                        pieces.push(Interval::new(lo, hi));
                    }
                }
                merge_intervals(pieces)
            }
        };

        for f in self.physical_edges() {
            if lit.is_empty() {
                break;
            }
            if f.index == target || Some(f.index) == support.edge {
                continue;
            }
            let (mut f0, mut f1) = (f.a, f.b);
            if let (SupportKind::Reflection, Some(w)) = (support.kind, support.edge) {
                // only the part beyond the reflecting line can block
                let win = &self.edges[w];
                match clip_segment_far_side(f0, f1, c, win.a, win.b) {
                    Some((u, v)) => {
                        f0 = u;
                        f1 = v;
                    }
                    None => continue,
                }
            }
            if f0.dist(f1) <= self.eps {
                continue;
            }
            if let Some((lo, hi)) = shadow_on_edge(e, c, f0, f1, self.eps) {
                lit = subtract_open(lit, lo, hi);
            }
        }

        let min_len = self.eps / e.length();
        lit.retain(|iv| iv.len() > min_len);
        lit
    }

    /// Whether `x` belongs to the (closed) support.
    pub fn support_contains(&self, support: &SupportDescriptor, x: Point2) -> bool {
        let c = support.center;
        match support.kind {
            SupportKind::Source | SupportKind::Diffraction => self.is_visible(c, x),
            SupportKind::Reflection => {
                let e = &self.edges[support.edge.expect("reflection support has an edge")];
                match self.reflection_crossing(support, e, x) {
                    Some(y) => self.is_visible_excluding(y, x, Some(e.index)),
                    None => false,
                }
            }
        }
    }

    /// Point where the segment from the image `center` to `x` crosses the
    /// reflecting edge inside a lit interval.
    fn reflection_crossing(
        &self,
        support: &SupportDescriptor,
        e: &Edge,
        x: Point2,
    ) -> Option<Point2> {
        let c = support.center;
        let dc = e.signed_distance(c);
        let dx = e.signed_distance(x);
        if dc >= 0.0 || dx < -self.eps {
            return None;
        }
        let tau = dc / (dc - dx.max(0.0));
        let y = c.lerp(x, tau);
        let d = e.b - e.a;
        let s = (y - e.a).dot(d) / d.dot(d);
        let slack = self.eps / e.length();
        support
            .lit_intervals
            .iter()
            .any(|iv| iv.contains(s, slack))
            .then_some(y)
    }

    /// Whether vertex `v` lies in the closure of `support`, reached by a
    /// straight path that arrives from inside the domain.
    pub fn vertex_in_support_closure(&self, support: &SupportDescriptor, v: &VertexInfo) -> bool {
        let c = support.center;
        let w = v.position;
        if c.dist(w) <= self.eps {
            return false;
        }
        let corner = self.corner_of_vertex(v);
        let back = (c - w) * (1.0 / c.dist(w));
        if self.strictly_exterior(corner, back) {
            return false;
        }
        match support.kind {
            SupportKind::Source | SupportKind::Diffraction => self.is_visible(c, w),
            SupportKind::Reflection => {
                let e = &self.edges[support.edge.expect("reflection support has an edge")];
                match self.reflection_crossing(support, e, w) {
                    Some(y) => self.is_visible_excluding(y, w, Some(e.index)),
                    None => false,
                }
            }
        }
    }

    /// Wedge frame at vertex `v` for a wave arriving from `source`.
    ///
    /// Angles are measured counterclockwise from the outgoing edge of `v`.
    pub fn local_wedge_frame(&self, v: &VertexInfo, source: Point2) -> Result<WedgeLocalFrame> {
        if source.dist(v.position) <= self.eps {
            return Err(Error::Degenerate(
                "source coincides with the diffracting vertex".into(),
            ));
        }
        let alpha = v.exterior_angle;
        if (alpha - PI).abs() <= EPS_ANGLE {
            return Err(Error::Degenerate(format!("vertex {} is flat", v.index)));
        }
        let out = &self.edges[v.adjacent_edges.1];
        let ref_angle = out.angle();
        let opening = TAU - alpha;
        let mut theta = wrap_angle((source - v.position).angle() - ref_angle);
        // directions just below the reference face wrap to ~2π
        if theta > TAU - EPS_ANGLE {
            theta -= TAU;
        }
        if theta < -EPS_ANGLE || theta > opening + EPS_ANGLE {
            return Err(Error::InvalidArgument(format!(
                "source at local angle {theta} is not visible from vertex {}",
                v.index
            )));
        }
        // mixed faces take the reference face condition
        let bc = out.bc;
        Ok(WedgeLocalFrame::new(
            v.position,
            ref_angle,
            alpha,
            theta,
            bc.sign(),
        ))
    }
}

pub(crate) fn point_in_ring(p: Point2, ring: &[Point2]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.x2 > p.x2) != (b.x2 > p.x2) {
            let x = a.x1 + (p.x2 - a.x2) / (b.x2 - a.x2) * (b.x1 - a.x1);
            if p.x1 < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Keeps the part of `e` (restricted to `range`) where
/// `cross(w, z - o) >= 0`.
fn clip_left(e: &Edge, range: (f64, f64), o: Point2, w: Point2) -> Option<(f64, f64)> {
    let f0 = w.cross(e.a - o);
    let f1 = w.cross(e.b - e.a);
    let (mut lo, mut hi) = range;
    if f1 == 0.0 {
        return (f0 >= 0.0).then_some(range);
    }
    let root = -f0 / f1;
    if f1 > 0.0 {
        lo = lo.max(root);
    } else {
        hi = hi.min(root);
    }
    (lo <= hi).then_some((lo, hi))
}

/// Clips `e` to the closed cone at `c` spanned by `p0` and `p1`
/// (opening < π).
fn clip_cone(e: &Edge, range: (f64, f64), c: Point2, p0: Point2, p1: Point2) -> Option<(f64, f64)> {
    let (mut u, mut v) = (p0 - c, p1 - c);
    if u.cross(v) < 0.0 {
        std::mem::swap(&mut u, &mut v);
    }
    clip_left(e, range, c, u).and_then(|r| clip_left(e, r, c, -v))
}

/// Clips `e` to the closed half-plane bounded by line `(la, lb)` that does
/// not contain `c`.
fn clip_far_side(
    e: &Edge,
    range: (f64, f64),
    c: Point2,
    la: Point2,
    lb: Point2,
) -> Option<(f64, f64)> {
    let w = if (lb - la).cross(c - la) > 0.0 {
        la - lb
    } else {
        lb - la
    };
    clip_left(e, range, la, w)
}

fn clip_segment_far_side(
    p: Point2,
    q: Point2,
    c: Point2,
    la: Point2,
    lb: Point2,
) -> Option<(Point2, Point2)> {
    let tmp = Edge {
        a: p,
        b: q,
        bc: BoundaryCondition::Neumann,
        index: usize::MAX,
        physical: true,
    };
    clip_far_side(&tmp, (0.0, 1.0), c, la, lb).map(|(lo, hi)| (tmp.point_at(lo), tmp.point_at(hi)))
}

/// Parameter range of `e` hidden from `c` by the segment `(f0, f1)`.
fn shadow_on_edge(e: &Edge, c: Point2, f0: Point2, f1: Point2, eps: f64) -> Option<(f64, f64)> {
    let d = f1 - f0;
    if (d.cross(c - f0) / d.norm()).abs() <= eps {
        // seen edge-on: grazing only
        return None;
    }
    clip_cone(e, (0.0, 1.0), c, f0, f1).and_then(|r| clip_far_side(e, r, c, f0, f1))
}

fn subtract_open(intervals: Vec<Interval>, lo: f64, hi: f64) -> Vec<Interval> {
    if hi <= lo {
        return intervals;
    }
    let mut out = Vec::with_capacity(intervals.len() + 1);
    for iv in intervals {
        if hi <= iv.lo || lo >= iv.hi {
            out.push(iv);
            continue;
        }
        if lo > iv.lo {
            out.push(Interval::new(iv.lo, lo));
        }
        if hi < iv.hi {
            out.push(Interval::new(hi, iv.hi));
        }
    }
    out
}

fn merge_intervals(mut v: Vec<Interval>) -> Vec<Interval> {
    v.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out: Vec<Interval> = Vec::with_capacity(v.len());
    for iv in v {
        match out.last_mut() {
            Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
            _ => out.push(iv),
        }
    }
    out
}
