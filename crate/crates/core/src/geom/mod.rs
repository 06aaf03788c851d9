//! Room geometry: polygon predicates, the evaluation grid, and per-reflector
//! visibility masks.

mod grid;
mod point;
mod polygon;
mod room;
mod visibility;

pub use grid::Grid;
pub use point::{Point2, Point3};
pub use polygon::{BoundaryPoint, Polygon};
pub use room::*;
pub use visibility::{cone_mask, los_mask, visibility_mask, visibility_polygon, VisibilityMask, RAY_OFFSET};
