use super::Point2;
use crate::{Error, Result, Scalar};

/// Simple polygon with counterclockwise vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon<T> {
    vertices: Vec<Point2<T>>,
}

/// Closest point on a polygon boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint<T> {
    pub point: Point2<T>,
    pub distance: T,
    /// Edge `i` runs from vertex `i` to vertex `i + 1`.
    pub edge: usize,
    /// Set when the closest point is a vertex rather than an edge interior.
    pub vertex: Option<usize>,
}

impl<T: Scalar> Polygon<T> {
    /// Validates and stores `vertices`. Clockwise input is reversed.
    pub fn new(mut vertices: Vec<Point2<T>>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "{} vertices, at least 3 required",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        let area = signed_area(&vertices);
        if area == T::zero() {
            return Err(Error::InvalidPolygon("zero area".into()));
        }
        if area < T::zero() {
            vertices.reverse();
        }
        let poly = Self { vertices };
        poly.check_simple()?;
        Ok(poly)
    }

    /// Skips the simplicity check; used for polygons derived from a valid room.
    pub(crate) fn from_ccw_unchecked(vertices: Vec<Point2<T>>) -> Self {
        Self { vertices }
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: T, y0: T, x1: T, y1: T) -> Result<Self> {
        Self::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point2<T>] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge(&self, i: usize) -> (Point2<T>, Point2<T>) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2<T>, Point2<T>)> + '_ {
        (0..self.vertices.len()).map(move |i| self.edge(i))
    }

    pub fn signed_area(&self) -> T {
        signed_area(&self.vertices)
    }

    pub fn area(&self) -> T {
        self.signed_area().abs()
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bounding_box(&self) -> (Point2<T>, Point2<T>) {
        let mut lo = self.vertices[0];
        let mut hi = lo;
        for v in &self.vertices[1..] {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// Length scale used to make tolerances relative.
    pub fn scale(&self) -> T {
        let (lo, hi) = self.bounding_box();
        (hi.x - lo.x).max(hi.y - lo.y).max(T::one())
    }

    pub fn centroid(&self) -> Point2<T> {
        let mut c = Point2::zero();
        let mut a2 = T::zero();
        for (p, q) in self.edges() {
            let w = p.cross(q);
            a2 += w;
            c += (p + q) * w;
        }
        c * (T::one() / (T::of(3.0) * a2))
    }

    /// Closed-set membership: boundary points count as inside.
    pub fn contains(&self, p: Point2<T>) -> bool {
        if self.crossing_parity(p) {
            return true;
        }
        let tol = T::geom_eps() * self.scale();
        self.within_of_boundary(p, tol)
    }

    fn within_of_boundary(&self, p: Point2<T>, tol: T) -> bool {
        let tol_sq = tol * tol;
        self.edges().any(|(a, b)| {
            let ab = b - a;
            let len_sq = ab.norm_sq();
            let t = if len_sq > T::zero() {
                ((p - a).dot(ab) / len_sq).max(T::zero()).min(T::one())
            } else {
                T::zero()
            };
            p.dist_sq(a + ab * t) <= tol_sq
        })
    }

    fn crossing_parity(&self, p: Point2<T>) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn nearest_boundary_point(&self, p: Point2<T>) -> BoundaryPoint<T> {
        let n = self.vertices.len();
        let mut best: Option<BoundaryPoint<T>> = None;
        for i in 0..n {
            let (a, b) = self.edge(i);
            let ab = b - a;
            let len_sq = ab.norm_sq();
            let t = if len_sq > T::zero() {
                ((p - a).dot(ab) / len_sq).max(T::zero()).min(T::one())
            } else {
                T::zero()
            };
            let q = a + ab * t;
            let d = p.dist(q);
            if best.map_or(true, |bp| d < bp.distance) {
                let vertex = if t == T::zero() {
                    Some(i)
                } else if t == T::one() {
                    Some((i + 1) % n)
                } else {
                    None
                };
                best = Some(BoundaryPoint {
                    point: q,
                    distance: d,
                    edge: i,
                    vertex,
                });
            }
        }
        best.expect("polygon has edges")
    }

    /// Distance to the nearest edge: positive inside, negative outside.
    pub fn boundary_distance(&self, p: Point2<T>) -> T {
        let d = self.nearest_boundary_point(p).distance;
        if self.crossing_parity(p) || d == T::zero() {
            d
        } else {
            -d
        }
    }

    /// Unit normal of edge `i` pointing into the polygon.
    pub fn inward_normal(&self, i: usize) -> Point2<T> {
        let (a, b) = self.edge(i);
        (b - a).perp().normalized().unwrap_or_else(Point2::zero)
    }

    /// True if the open segment `p–q` crosses or touches a wall anywhere
    /// other than at its own endpoints.
    pub fn segment_blocked(&self, p: Point2<T>, q: Point2<T>) -> bool {
        self.edges().any(|(a, b)| segments_cross(p, q, a, b))
    }

    fn check_simple(&self) -> Result<()> {
        let n = self.vertices.len();
        let tol = T::geom_eps() * self.scale();
        for i in 0..n {
            let (a, b) = self.edge(i);
            if a.dist(b) <= tol {
                return Err(Error::InvalidPolygon(format!("degenerate edge {i}")));
            }
        }
        for i in 0..n {
            let (a, b) = self.edge(i);
            for j in i + 1..n {
                let (c, d) = self.edge(j);
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    // shared vertex; reject folding back onto the previous edge
                    let (u, v) = if j == i + 1 { (a - b, d - c) } else { (b - a, c - d) };
                    if u.cross(v).abs() <= tol * u.norm() * v.norm() && u.dot(v) > T::zero() {
                        return Err(Error::InvalidPolygon(format!("edges {i} and {j} overlap")));
                    }
                } else if segments_intersect(a, b, c, d, tol) {
                    return Err(Error::InvalidPolygon(format!("edges {i} and {j} intersect")));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn signed_area<T: Scalar>(vs: &[Point2<T>]) -> T {
    let n = vs.len();
    let mut s = T::zero();
    for i in 0..n {
        s += vs[i].cross(vs[(i + 1) % n]);
    }
    s * T::of(0.5)
}

fn point_segment_dist<T: Scalar>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == T::zero() {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len_sq).max(T::zero()).min(T::one());
    p.dist(a + ab * t)
}

/// Closed segments intersect (including touching), with tolerance `tol`.
fn segments_intersect<T: Scalar>(a: Point2<T>, b: Point2<T>, c: Point2<T>, d: Point2<T>, tol: T) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    if ((d1 > T::zero() && d2 < T::zero()) || (d1 < T::zero() && d2 > T::zero()))
        && ((d3 > T::zero() && d4 < T::zero()) || (d3 < T::zero() && d4 > T::zero()))
    {
        return true;
    }
    point_segment_dist(c, a, b) <= tol
        || point_segment_dist(d, a, b) <= tol
        || point_segment_dist(a, c, d) <= tol
        || point_segment_dist(b, c, d) <= tol
}

/// Segment `p–q` meets wall `a–b` at a point other than `p` or `q`.
fn segments_cross<T: Scalar>(p: Point2<T>, q: Point2<T>, a: Point2<T>, b: Point2<T>) -> bool {
    let r = q - p;
    let s = b - a;
    let denom = r.cross(s);
    if denom == T::zero() {
        return false;
    }
    let t = (a - p).cross(s) / denom;
    let u = (a - p).cross(r) / denom;
    let eps = T::geom_eps();
    t > eps && t < T::one() - eps && u >= T::zero() && u <= T::one()
}
