//! Planar geometry kernel.
//!
//! Points and axis-aligned rectangles, Euclidean distances between them, and
//! the six DE-9IM connectivity predicates used by pattern edges.
//!
//! Predicate evaluation compares coordinates exactly. There is no epsilon:
//! two rectangles sharing the edge `x = 1` touch, and a rectangle whose edge
//! sits at `x = 1.0000000001` is disjoint from it. Data that needs tolerant
//! contact must be snapped before ingestion.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("coordinate is not finite: ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
    #[error("inverted rectangle: min ({min_x}, {min_y}) exceeds max ({max_x}, {max_y})")]
    Inverted {
        min_x: f64,
        min_y: f64,
        max_x: f64,
        max_y: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(GeometryError::NonFinite { x, y });
        }
        Ok(Self { x, y })
    }

    pub fn distance(&self, other: &Point) -> f64 {
        euclidean_distance(self, other)
    }

    /// The degenerate rectangle located at this point.
    pub fn to_rect(self) -> Rect {
        Rect {
            min_x: self.x,
            min_y: self.y,
            max_x: self.x,
            max_y: self.y,
        }
    }
}

/// Axis-aligned rectangle with closed bounds. Zero width and/or height is
/// allowed and yields a segment or a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self, GeometryError> {
        Point::new(min_x, min_y)?;
        Point::new(max_x, max_y)?;
        if min_x > max_x || min_y > max_y {
            return Err(GeometryError::Inverted {
                min_x,
                min_y,
                max_x,
                max_y,
            });
        }
        Ok(Self {
            min_x,
            min_y,
            max_x,
            max_y,
        })
    }

    pub(crate) fn from_bounds(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        debug_assert!(min_x <= max_x && min_y <= max_y);
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn center(&self) -> Point {
        Point {
            x: self.min_x + self.width() / 2.0,
            y: self.min_y + self.height() / 2.0,
        }
    }

    /// Closed intersection test: shared edges and corners count.
    pub fn intersects(&self, other: &Rect) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        self.min_x <= p.x && p.x <= self.max_x && self.min_y <= p.y && p.y <= self.max_y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.min_x <= other.min_x
            && other.max_x <= self.max_x
            && self.min_y <= other.min_y
            && other.max_y <= self.max_y
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }

    /// Grows every side by `margin` (which must be non-negative).
    pub fn expand(&self, margin: f64) -> Rect {
        Rect {
            min_x: self.min_x - margin,
            min_y: self.min_y - margin,
            max_x: self.max_x + margin,
            max_y: self.max_y + margin,
        }
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            Point { x: self.min_x, y: self.min_y },
            Point { x: self.max_x, y: self.min_y },
            Point { x: self.min_x, y: self.max_y },
            Point { x: self.max_x, y: self.max_y },
        ]
    }

    pub fn min_distance(&self, other: &Rect) -> f64 {
        min_distance(self, other)
    }

    pub fn max_distance(&self, other: &Rect) -> f64 {
        max_distance(self, other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Point(Point),
    Rect(Rect),
}

impl Geometry {
    pub fn mbr(&self) -> Rect {
        match self {
            Geometry::Point(p) => p.to_rect(),
            Geometry::Rect(r) => *r,
        }
    }

    /// Topological dimension: 0 for points (and zero-size rectangles), 1 for
    /// segments, 2 for rectangles with area.
    pub fn dimension(&self) -> u8 {
        let [x, y] = interior(self);
        x.is_open() as u8 + y.is_open() as u8
    }
}

impl From<Point> for Geometry {
    fn from(p: Point) -> Self {
        Geometry::Point(p)
    }
}

impl From<Rect> for Geometry {
    fn from(r: Rect) -> Self {
        Geometry::Rect(r)
    }
}

/// Connectivity predicates a pattern edge may demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TopoPredicate {
    Equals,
    Touches,
    Covers,
    CoveredBy,
    PartiallyOverlaps,
    Disjoint,
}

impl TopoPredicate {
    pub const ALL: [TopoPredicate; 6] = [
        TopoPredicate::Equals,
        TopoPredicate::Touches,
        TopoPredicate::Covers,
        TopoPredicate::CoveredBy,
        TopoPredicate::PartiallyOverlaps,
        TopoPredicate::Disjoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TopoPredicate::Equals => "equals",
            TopoPredicate::Touches => "touches",
            TopoPredicate::Covers => "covers",
            TopoPredicate::CoveredBy => "covered_by",
            TopoPredicate::PartiallyOverlaps => "partially_overlaps",
            TopoPredicate::Disjoint => "disjoint",
        }
    }

    /// The predicate obtained by swapping the operands.
    pub fn converse(self) -> TopoPredicate {
        match self {
            TopoPredicate::Covers => TopoPredicate::CoveredBy,
            TopoPredicate::CoveredBy => TopoPredicate::Covers,
            other => other,
        }
    }
}

impl fmt::Display for TopoPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown topological predicate `{0}`")]
pub struct UnknownPredicate(pub String);

impl FromStr for TopoPredicate {
    type Err = UnknownPredicate;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TopoPredicate::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownPredicate(s.to_owned()))
    }
}

/// One axis of a geometry's interior: an open interval or a single value.
#[derive(Debug, Clone, Copy)]
enum Span {
    Open(f64, f64),
    At(f64),
}

impl Span {
    fn of(lo: f64, hi: f64) -> Span {
        if lo < hi {
            Span::Open(lo, hi)
        } else {
            Span::At(lo)
        }
    }

    fn is_open(self) -> bool {
        matches!(self, Span::Open(..))
    }

    /// Intersection of two spans; `Some(true)` when the result is an open
    /// interval, `Some(false)` when it is a single value.
    fn meet(self, other: Span) -> Option<bool> {
        match (self, other) {
            (Span::Open(a, b), Span::Open(c, d)) => (a.max(c) < b.min(d)).then_some(true),
            (Span::Open(a, b), Span::At(v)) | (Span::At(v), Span::Open(a, b)) => {
                (a < v && v < b).then_some(false)
            }
            (Span::At(v), Span::At(w)) => (v == w).then_some(false),
        }
    }

    fn within(self, lo: f64, hi: f64) -> bool {
        match self {
            Span::Open(a, b) => lo <= a && b <= hi,
            Span::At(v) => lo <= v && v <= hi,
        }
    }
}

// Interiors of points and rectangles are products of per-axis spans: a box is
// (x0,x1)×(y0,y1), a horizontal segment (x0,x1)×{y}, a point {x}×{y}. The
// closure of every geometry is its MBR.
fn interior(g: &Geometry) -> [Span; 2] {
    let r = g.mbr();
    [Span::of(r.min_x, r.max_x), Span::of(r.min_y, r.max_y)]
}

/// Dimension of the interior intersection, or `None` when the interiors are
/// disjoint.
fn interior_meet_dimension(a: &Geometry, b: &Geometry) -> Option<u8> {
    let [ax, ay] = interior(a);
    let [bx, by] = interior(b);
    let x = ax.meet(bx)?;
    let y = ay.meet(by)?;
    Some(x as u8 + y as u8)
}

/// Whether the interior of `a` lies inside the closure of `b`.
fn interior_within_closure(a: &Geometry, b: &Geometry) -> bool {
    let [ax, ay] = interior(a);
    let c = b.mbr();
    ax.within(c.min_x, c.max_x) && ay.within(c.min_y, c.max_y)
}

/// Evaluates the DE-9IM relation `pred` between `a` and `b`.
///
/// A point has an empty boundary, so a point lying on a rectangle's edge both
/// touches and is covered by it. `partially_overlaps` only holds between
/// geometries of equal dimension.
pub fn holds(pred: TopoPredicate, a: &Geometry, b: &Geometry) -> bool {
    let (ra, rb) = (a.mbr(), b.mbr());
    match pred {
        TopoPredicate::Equals => ra == rb,
        TopoPredicate::Disjoint => !ra.intersects(&rb),
        TopoPredicate::Touches => ra.intersects(&rb) && interior_meet_dimension(a, b).is_none(),
        TopoPredicate::Covers => ra.contains_rect(&rb),
        TopoPredicate::CoveredBy => rb.contains_rect(&ra),
        TopoPredicate::PartiallyOverlaps => {
            let dim = a.dimension();
            dim == b.dimension()
                && interior_meet_dimension(a, b) == Some(dim)
                && !interior_within_closure(a, b)
                && !interior_within_closure(b, a)
        }
    }
}

/// Every predicate that holds between `a` and `b`, in declaration order.
pub fn satisfied_predicates(a: &Geometry, b: &Geometry) -> Vec<TopoPredicate> {
    TopoPredicate::ALL
        .into_iter()
        .filter(|&p| holds(p, a, b))
        .collect()
}

pub fn euclidean_distance(a: &Point, b: &Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Smallest distance between any point of `a` and any point of `b`.
pub fn min_distance(a: &Rect, b: &Rect) -> f64 {
    let dx = (b.min_x - a.max_x).max(a.min_x - b.max_x).max(0.0);
    let dy = (b.min_y - a.max_y).max(a.min_y - b.max_y).max(0.0);
    dx.hypot(dy)
}

/// Largest distance between any point of `a` and any point of `b`.
pub fn max_distance(a: &Rect, b: &Rect) -> f64 {
    let dx = (a.max_x - b.min_x).abs().max((b.max_x - a.min_x).abs());
    let dy = (a.max_y - b.min_y).abs().max((b.max_y - a.min_y).abs());
    dx.hypot(dy)
}

pub fn mbr(g: &Geometry) -> Rect {
    g.mbr()
}
