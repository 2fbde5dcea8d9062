//! Minimum-time bounded-curvature paths across a plane partitioned into
//! convex regions, each with its own speed and minimum turning radius.
//!
//! The crate plans paths ([`planner`]), grades them against the first-order
//! necessary conditions ([`adjoint`]) and cross-checks them with an
//! independent brute-force search ([`oracle`]).

pub mod adjoint;
pub mod dubins;
pub mod error;
pub mod geometry;
mod numeric;
pub mod oracle;
pub mod path;
pub mod planner;
pub mod presets;
pub mod refraction;

pub use error::{Error, Result};
pub use geometry::{Configuration, Point, Region, RegionId, RegionMap, SegmentKind};
pub use path::{path_time, PathSolution, Phase, Segment};
