use super::{Grid, Point2, Point3, Polygon, RoomModel};
use crate::{Error, Result, Scalar};

/// Angular offset of the side rays cast past every vertex.
pub const RAY_OFFSET: f64 = 1e-4;

/// Per grid element flag: reflector detectable from that element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VisibilityMask {
    bits: Vec<bool>,
}

impl VisibilityMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn all(n: usize, value: bool) -> Self {
        Self { bits: vec![value; n] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn and(&self, other: &Self) -> Self {
        Self::new(self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect())
    }
}

/// Region of `poly` visible from `q` by straight lines.
///
/// Casts a ray toward every vertex and two rays offset by
/// [`RAY_OFFSET`] on either side, keeps the first wall hit of each,
/// and joins the hits in counterclockwise angular order.
pub fn visibility_polygon<T: Scalar>(q: Point2<T>, poly: &Polygon<T>) -> Result<Polygon<T>> {
    let scale = poly.scale();
    if !poly.contains(q) || poly.boundary_distance(q) <= T::geom_eps() * scale {
        return Err(Error::OutsideRoom { x: q.x.as_f64(), y: q.y.as_f64() });
    }
    let eps = T::of(RAY_OFFSET);
    let mut hits: Vec<(T, T, Point2<T>)> = Vec::with_capacity(poly.len() * 3);
    for &v in poly.vertices() {
        let to_v = v - q;
        let base = to_v.angle();
        let dv = to_v.norm();
        for off in [-eps, T::zero(), eps] {
            let angle = base + off;
            let dir = Point2::from_angle(angle);
            let Some(t) = first_hit(q, dir, poly) else { continue };
            let p = if off == T::zero() && t >= dv * (T::one() - T::geom_eps()) {
                v
            } else {
                q + dir * t
            };
            hits.push((normalize_angle(angle), t, p));
        }
    }
    hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
    let tol = T::geom_eps() * scale;
    let mut out: Vec<Point2<T>> = Vec::with_capacity(hits.len());
    for (_, _, p) in hits {
        if out.last().map_or(true, |l: &Point2<T>| l.dist(p) > tol) {
            out.push(p);
        }
    }
    while out.len() > 1 && out[0].dist(*out.last().unwrap()) <= tol {
        out.pop();
    }
    if out.len() < 3 {
        return Err(Error::InvalidPolygon("degenerate visibility region".into()));
    }
    Ok(Polygon::from_ccw_unchecked(out))
}

fn normalize_angle<T: Scalar>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut a = a;
    while a > T::PI() {
        a -= two_pi;
    }
    while a <= -T::PI() {
        a += two_pi;
    }
    a
}

/// Distance along `dir` (unit) from `q` to the first wall.
fn first_hit<T: Scalar>(q: Point2<T>, dir: Point2<T>, poly: &Polygon<T>) -> Option<T> {
    let s_tol = T::geom_eps();
    let mut best: Option<T> = None;
    for (a, b) in poly.edges() {
        let e = b - a;
        let denom = dir.cross(e);
        if denom.abs() <= T::epsilon() * e.norm() {
            continue;
        }
        let aq = a - q;
        let t = aq.cross(e) / denom;
        let s = aq.cross(dir) / denom;
        if t > T::zero() && s >= -s_tol && s <= T::one() + s_tol && best.map_or(true, |bt| t < bt) {
            best = Some(t);
        }
    }
    best
}

/// Grid elements whose horizontal distance to the reflector lies within the
/// detection cone radius.
pub fn cone_mask<T: Scalar>(q: Point3<T>, grid: &Grid<T>, room: &RoomModel<T>) -> VisibilityMask {
    let r = room.cone_radius();
    let r2 = r * r;
    let qxy = q.xy();
    VisibilityMask::new(grid.centers().iter().map(|c| c.xy().dist_sq(qxy) <= r2).collect())
}

/// Line-of-sight mask: grid elements inside the reflector's visibility polygon.
pub fn los_mask<T: Scalar>(q: Point3<T>, grid: &Grid<T>, room: &RoomModel<T>) -> Result<VisibilityMask> {
    let vis = visibility_polygon(q.xy(), &room.boundary)?;
    let (lo, hi) = vis.bounding_box();
    Ok(VisibilityMask::new(
        grid.centers()
            .iter()
            .map(|c| {
                let p = c.xy();
                p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && vis.contains(p)
            })
            .collect(),
    ))
}

/// Cone mask AND line-of-sight mask.
pub fn visibility_mask<T: Scalar>(q: Point3<T>, grid: &Grid<T>, room: &RoomModel<T>) -> Result<VisibilityMask> {
    let cone = cone_mask(q, grid, room);
    if cone.count() == 0 {
        return Ok(cone);
    }
    let vis = visibility_polygon(q.xy(), &room.boundary)?;
    Ok(VisibilityMask::new(
        grid.centers()
            .iter()
            .zip(cone.bits())
            .map(|(c, &in_cone)| in_cone && vis.contains(c.xy()))
            .collect(),
    ))
}
