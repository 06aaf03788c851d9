//! Reflector placement optimization for radar-based indoor positioning.
//!
//! The crate evaluates reflector placements under two objectives (fingerprint
//! ambiguity and summed GDOP), optimizes them with a variable-dimension
//! multi-objective particle swarm, and validates them by tracking a simulated
//! robot with a Monte Carlo localization filter.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

pub mod amcl;
pub mod assign;
pub mod geom;
pub mod harness;
pub mod mopso;
pub mod objectives;
pub mod placement;
pub mod repair;

mod error;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point2d = geom::Point2<f64>;
pub type Point3d = geom::Point3<f64>;
pub type Polygon64 = geom::Polygon<f64>;
pub type Room64 = geom::RoomModel<f64>;
pub type Grid64 = geom::Grid<f64>;
pub type Placement64 = placement::Placement<f64>;
