//! Benchmark scenarios.
//!
//! * Two half-planes split by `y = 0` (region 1 above, region 2 below),
//!   clipped to a square, with start `(-3, 4.5)` heading `pi/4` and goal
//!   `(1, -4)` heading `5 pi/4`.
//! * Three regions: region 1 `[-w, 0] x [0, w]`, region 3 `[-w, 0] x [-w, 0]`
//!   and region 2 `[0, w] x [-w, w]` to their right. Start `(-1, 2)` and goal
//!   `(-1, -2)`, both heading straight down.

use std::f64::consts::PI;

use crate::error::Result;
use crate::geometry::{Configuration, Point, Region, RegionId, RegionMap};
use crate::planner::Scenario;

/// Half-width of the square clipping the two half-planes.
pub const HALF_PLANE_EXTENT: f64 = 20.0;

/// Side of the three-region layout.
pub const THREE_REGION_SIDE: f64 = 4.0;

fn rect(id: u32, x0: f64, y0: f64, x1: f64, y1: f64, v: f64, r: f64) -> Result<Region> {
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
}

/// Two half-planes with the given parameters and the benchmark poses.
pub fn half_planes(v1: f64, r1: f64, v2: f64, r2: f64) -> Result<Scenario> {
    let b = HALF_PLANE_EXTENT;
    let map = RegionMap::new(vec![
        rect(1, -b, 0.0, b, b, v1, r1)?,
        rect(2, -b, -b, b, 0.0, v2, r2)?,
    ])?;
    Scenario::new(
        map,
        Configuration::new(-3.0, 4.5, PI / 4.0),
        RegionId(1),
        Configuration::new(1.0, -4.0, 5.0 * PI / 4.0),
        RegionId(2),
    )
}

/// Upper speeds used by the half-plane sweeps.
pub const HALF_PLANE_SPEEDS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Equal angular-rate bounds: `r1 = v1`, `v2 = r2 = 1`.
pub fn half_planes_equal_rate(v1: f64) -> Result<Scenario> {
    half_planes(v1, v1, 1.0, 1.0)
}

/// Faster turning above: `r1 = v1 / 2`, `v2 = r2 = 1`.
pub fn half_planes_fast_turn(v1: f64) -> Result<Scenario> {
    half_planes(v1, 0.5 * v1, 1.0, 1.0)
}

/// Three-region layout with outer speed `v_outer`, radius `r_outer`, and the
/// side region's parameters `v2`, `r2`.
pub fn three_regions(v_outer: f64, r_outer: f64, v2: f64, r2: f64, side: f64) -> Result<Scenario> {
    let w = side;
    let map = RegionMap::new(vec![
        rect(1, -w, 0.0, 0.0, w, v_outer, r_outer)?,
        rect(2, 0.0, -w, w, w, v2, r2)?,
        rect(3, -w, -w, 0.0, 0.0, v_outer, r_outer)?,
    ])?;
    Scenario::new(
        map,
        Configuration::new(-1.0, 2.0, PI),
        RegionId(1),
        Configuration::new(-1.0, -2.0, PI),
        RegionId(3),
    )
}

/// Three-region sweep point: `v1 = v3 = 0.25`, all radii `0.5`.
pub fn three_region_sweep(v2: f64) -> Result<Scenario> {
    three_regions(0.25, 0.5, v2, 0.5, THREE_REGION_SIDE)
}
