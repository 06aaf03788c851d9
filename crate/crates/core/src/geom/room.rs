use super::{Point2, Polygon};
use crate::{Error, Result, Scalar};

pub const DEFAULT_GRID_SIZE: f64 = 0.1;
pub const DEFAULT_RADAR_HEIGHT: f64 = 0.5;
pub const DEFAULT_REFLECTOR_HEIGHT: f64 = 3.0;
pub const DEFAULT_RANGE_RESOLUTION: f64 = 0.075;
pub const DEFAULT_CONE_HALF_ANGLE_DEG: f64 = 45.0;
pub const DEFAULT_WALL_MARGIN: f64 = 0.5;

/// Tolerance on the wall margin shared by projection and constraint checks.
pub const MARGIN_TOL: f64 = 1e-6;

const MARGIN_MAX_ITER: usize = 50;

/// Room geometry plus the sensing parameters that depend on it.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomModel<T> {
    pub boundary: Polygon<T>,
    /// Edge length of the square grid elements.
    pub grid_size: T,
    /// Radar height on the robot.
    pub radar_height: T,
    /// Mounting height shared by all reflectors.
    pub reflector_height: T,
    pub range_resolution: T,
    pub cone_half_angle: T,
    /// Minimum reflector distance to any wall.
    pub wall_margin: T,
}

impl<T: Scalar> RoomModel<T> {
    /// Room with the default sensing parameters.
    pub fn new(boundary: Polygon<T>) -> Self {
        Self {
            boundary,
            grid_size: T::of(DEFAULT_GRID_SIZE),
            radar_height: T::of(DEFAULT_RADAR_HEIGHT),
            reflector_height: T::of(DEFAULT_REFLECTOR_HEIGHT),
            range_resolution: T::of(DEFAULT_RANGE_RESOLUTION),
            cone_half_angle: T::of(DEFAULT_CONE_HALF_ANGLE_DEG.to_radians()),
            wall_margin: T::of(DEFAULT_WALL_MARGIN),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidRoom(m.to_string()));
        if !(self.radar_height > T::zero()) {
            return bad("radar height must be positive");
        }
        if !(self.reflector_height > self.radar_height) {
            return bad("reflector height must exceed radar height");
        }
        if !(self.grid_size > T::zero()) {
            return bad("grid size must be positive");
        }
        if !(self.range_resolution > T::zero()) {
            return bad("range resolution must be positive");
        }
        if !(self.cone_half_angle > T::zero() && self.cone_half_angle < T::FRAC_PI_2()) {
            return bad("cone half-angle must lie in (0, pi/2)");
        }
        if !(self.wall_margin >= T::zero()) {
            return bad("wall margin must be non-negative");
        }
        Ok(())
    }

    /// Horizontal radius of the detection cone at reflector height.
    pub fn cone_radius(&self) -> T {
        (self.reflector_height - self.radar_height) * self.cone_half_angle.tan()
    }

    /// Inside the room and at least `wall_margin` from every wall.
    pub fn in_margin_region(&self, p: Point2<T>) -> bool {
        self.boundary.boundary_distance(p) >= self.wall_margin - T::of(MARGIN_TOL)
    }

    /// Moves `p` onto the margin region if it is not already inside it.
    ///
    /// Iterates a nearest-wall projection followed by an inward step of
    /// `wall_margin`; a step that worsens the wall distance is halved.
    pub fn project_into_margin(&self, p: Point2<T>) -> Result<Point2<T>> {
        let poly = &self.boundary;
        let margin = self.wall_margin;
        let tol = T::of(MARGIN_TOL * 0.1);
        let mut cur = p;
        for _ in 0..MARGIN_MAX_ITER {
            let d = poly.boundary_distance(cur);
            if d >= margin - tol {
                return Ok(cur);
            }
            let bp = poly.nearest_boundary_point(cur);
            let dir = self.inward_direction(cur, d, &bp);
            let mut candidate = bp.point + dir * margin;
            let mut cd = poly.boundary_distance(candidate);
            let mut halvings = 0;
            while cd < d && halvings < 20 {
                candidate = cur.lerp(candidate, T::of(0.5));
                cd = poly.boundary_distance(candidate);
                halvings += 1;
            }
            cur = candidate;
        }
        if poly.boundary_distance(cur) >= margin - tol {
            Ok(cur)
        } else {
            Err(Error::MarginProjection { iterations: MARGIN_MAX_ITER })
        }
    }

    fn inward_direction(&self, p: Point2<T>, signed: T, bp: &super::BoundaryPoint<T>) -> Point2<T> {
        let poly = &self.boundary;
        match bp.vertex {
            None => poly.inward_normal(bp.edge),
            Some(v) => {
                let away = p - bp.point;
                let n = poly.len();
                let bisector = (poly.inward_normal((v + n - 1) % n) + poly.inward_normal(v))
                    .normalized()
                    .unwrap_or_else(|| poly.inward_normal(v));
                match away.normalized() {
                    Some(u) if signed > T::zero() => u,
                    Some(u) if signed < T::zero() => {
                        let inward = -u;
                        // outside a reflex vertex `-u` can point back out
                        if inward.dot(bisector) > T::zero() {
                            inward
                        } else {
                            bisector
                        }
                    }
                    _ => bisector,
                }
            }
        }
    }
}
