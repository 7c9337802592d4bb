//! 2D field of a uniformly magnetized polygon (infinite extrusion).
//!
//! The magnetization is replaced by the surface charge `σ = M·n` on each edge.
//! For an edge from `a` to `b` with unit tangent `u` and outward normal `n`,
//! the line-charge integral of `(r - r')/|r - r'|²` has the closed form
//! `ln(|r-a| / |r-b|) u + θ n`, where `θ` is the signed angle the edge
//! subtends at `r`.

use std::f64::consts::PI;

use nalgebra::Vector2;

use super::{FieldPoint, SINGULAR_DISTANCE};
use crate::error::Result;
use crate::geometry::BlockPolygon;
use crate::MU0;

/// Magnetic field strength H (A/m) of `polygon` magnetized with `m` at `r`.
///
/// Valid anywhere off the polygon boundary; inside the block the flux density
/// is `μ0 (H + M)`.
pub fn h_field_2d(polygon: &BlockPolygon, m: Vector2<f64>, r: Vector2<f64>) -> Vector2<f64> {
    let mut h = Vector2::zeros();
    for k in 0..polygon.n_edges() {
        let (a, b) = polygon.edge(k);
        let ab = b - a;
        let len = ab.norm();
        let u = ab / len;
        let n = Vector2::new(u.y, -u.x);
        let sigma = m.dot(&n);
        if sigma == 0.0 {
            continue;
        }
        let ra = a - r;
        let rb = b - r;
        let log_term = (ra.norm() / rb.norm()).ln();
        let cross = rb.x * ra.y - rb.y * ra.x;
        let theta = cross.atan2(ra.dot(&rb));
        h += (u * log_term + n * theta) * sigma;
    }
    h / (2.0 * PI)
}

/// Flux density B (T) of one 2D block at an air point outside it.
pub fn field_2d_block(polygon: &BlockPolygon, m: Vector2<f64>, point: &FieldPoint) -> Result<Vector2<f64>> {
    point.require_air()?;
    let r = point.xy();
    if polygon.boundary_distance(r) <= SINGULAR_DISTANCE {
        return Err(point.region_error(format!("on the boundary of block {}", polygon.block_index)));
    }
    if polygon.contains(r) {
        return Err(point.region_error(format!("inside block {}", polygon.block_index)));
    }
    Ok(h_field_2d(polygon, m, r) * MU0)
}
