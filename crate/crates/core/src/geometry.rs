//! Planar primitives: points, simple polygons, containment tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Boundary tolerance for point-in-polygon tests, in meters.
pub const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn translate(&self, dx: T, dy: T) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

fn cross<T: Real>(o: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Squared distance from `p` to the segment `a`-`b`.
fn segment_distance_sq<T: Real>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq > T::zero() {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq)
            .max(T::zero())
            .min(T::one())
    } else {
        T::zero()
    };
    let cx = a.x + t * dx - p.x;
    let cy = a.y + t * dy - p.y;
    cx * cx + cy * cy
}

/// Proper crossing of two segments (interiors intersect at a single point).
fn segments_cross<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>, d: Point2<T>) -> bool {
    let eps = lit::<T>(BOUNDARY_EPS);
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps))
        && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
}

/// A closed polygon; the last vertex connects back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon<T> {
    pub vertices: Vec<Point2<T>>,
}

impl<T: Real> Polygon<T> {
    pub fn new(vertices: Vec<Point2<T>>) -> Self {
        Self { vertices }
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rect(x0: T, y0: T, x1: T, y1: T) -> Self {
        Self::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2<T>, Point2<T>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> T {
        let two = lit::<T>(2.0);
        self.edges()
            .map(|(a, b)| a.x * b.y - b.x * a.y)
            .fold(T::zero(), |acc, v| acc + v)
            / two
    }

    pub fn area(&self) -> T {
        self.signed_area().abs()
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point2<T> {
        let a = self.signed_area();
        if a == T::zero() {
            let n = lit::<T>(self.vertices.len() as f64);
            let sx = self.vertices.iter().fold(T::zero(), |s, p| s + p.x);
            let sy = self.vertices.iter().fold(T::zero(), |s, p| s + p.y);
            return Point2::new(sx / n, sy / n);
        }
        let six = lit::<T>(6.0);
        let (mut cx, mut cy) = (T::zero(), T::zero());
        for (p, q) in self.edges() {
            let f = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * f;
            cy += (p.y + q.y) * f;
        }
        Point2::new(cx / (six * a), cy / (six * a))
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bbox(&self) -> (Point2<T>, Point2<T>) {
        let mut lo = Point2::new(T::infinity(), T::infinity());
        let mut hi = Point2::new(T::neg_infinity(), T::neg_infinity());
        for p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    pub fn on_boundary(&self, p: Point2<T>) -> bool {
        let eps = lit::<T>(BOUNDARY_EPS);
        self.edges()
            .any(|(a, b)| segment_distance_sq(p, a, b) <= eps * eps)
    }

    /// Even-odd containment; points within the boundary tolerance count as inside.
    pub fn contains(&self, p: Point2<T>) -> bool {
        if self.on_boundary(p) {
            return true;
        }
        self.contains_strict(p)
    }

    fn contains_strict(&self, p: Point2<T>) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Strictly interior (not within tolerance of the boundary).
    pub fn contains_interior(&self, p: Point2<T>) -> bool {
        !self.on_boundary(p) && self.contains_strict(p)
    }

    /// Checks vertex count, non-zero area and simplicity.
    pub fn validate(&self, name: &str) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidPolygon {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        let n = self.vertices.len();
        if n < 3 {
            return Err(invalid("fewer than 3 vertices"));
        }
        if self
            .vertices
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(invalid("non-finite coordinate"));
        }
        if self.area() <= lit::<T>(BOUNDARY_EPS) {
            return Err(invalid("zero area"));
        }
        let edges: Vec<_> = self.edges().collect();
        for i in 0..n {
            let (a, b) = edges[i];
            if a.distance(&b) <= lit::<T>(BOUNDARY_EPS) {
                return Err(invalid("repeated vertex"));
            }
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (c, d) = edges[j];
                let touches = segment_distance_sq(a, c, d) <= lit::<T>(1e-18)
                    || segment_distance_sq(b, c, d) <= lit::<T>(1e-18)
                    || segment_distance_sq(c, a, b) <= lit::<T>(1e-18)
                    || segment_distance_sq(d, a, b) <= lit::<T>(1e-18);
                if touches || segments_cross(a, b, c, d) {
                    return Err(invalid("self-intersecting"));
                }
            }
        }
        Ok(())
    }

    /// True when the interiors of the two polygons intersect.
    pub fn overlaps(&self, other: &Self) -> bool {
        for (a, b) in self.edges() {
            for (c, d) in other.edges() {
                if segments_cross(a, b, c, d) {
                    return true;
                }
            }
        }
        self.vertices.iter().any(|&p| other.contains_interior(p))
            || other.vertices.iter().any(|&p| self.contains_interior(p))
            || other.contains_interior(self.centroid())
            || self.contains_interior(other.centroid())
    }
}

/// Parameters `t` in `[0, 1]` at which segment `a`-`b` meets the edges of `poly`.
fn boundary_hits<T: Real>(a: Point2<T>, b: Point2<T>, poly: &Polygon<T>, out: &mut Vec<T>) {
    let eps = lit::<T>(BOUNDARY_EPS);
    let rx = b.x - a.x;
    let ry = b.y - a.y;
    let len_sq = rx * rx + ry * ry;
    for (c, d) in poly.edges() {
        let sx = d.x - c.x;
        let sy = d.y - c.y;
        let denom = rx * sy - ry * sx;
        if denom.abs() > eps * eps {
            let qx = c.x - a.x;
            let qy = c.y - a.y;
            let t = (qx * sy - qy * sx) / denom;
            let u = (qx * ry - qy * rx) / denom;
            if t >= -eps && t <= T::one() + eps && u >= -eps && u <= T::one() + eps {
                out.push(t.max(T::zero()).min(T::one()));
            }
        } else if len_sq > T::zero() {
            // parallel: collinear edge endpoints split the segment
            for e in [c, d] {
                if segment_distance_sq(e, a, b) <= eps * eps {
                    let t = ((e.x - a.x) * rx + (e.y - a.y) * ry) / len_sq;
                    out.push(t.max(T::zero()).min(T::one()));
                }
            }
        }
    }
}

/// Whether segment `a`-`b` lies entirely inside the union of `polys`
/// (boundaries included).
pub fn segment_within_union<T: Real>(a: Point2<T>, b: Point2<T>, polys: &[&Polygon<T>]) -> bool {
    let inside_any = |p: Point2<T>| polys.iter().any(|poly| poly.contains(p));
    if !inside_any(a) || !inside_any(b) {
        return false;
    }
    let mut ts = vec![T::zero(), T::one()];
    for poly in polys {
        boundary_hits(a, b, poly, &mut ts);
    }
    ts.sort_by(|x, y| x.partial_cmp(y).expect("finite parameters"));
    let half = lit::<T>(0.5);
    ts.windows(2).all(|w| {
        if w[1] - w[0] <= lit::<T>(1e-12) {
            return true;
        }
        let t = (w[0] + w[1]) * half;
        inside_any(Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)))
    })
}
