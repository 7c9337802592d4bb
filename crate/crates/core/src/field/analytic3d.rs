//! 3D field of a uniformly magnetized prism (polygon extruded along z).
//!
//! Every facet carries a uniform surface charge. For a planar polygon with
//! unit normal `n` and charge `σ`, the field splits into a normal part
//! `σ Ω / 4π` (Ω the signed solid angle, positive on the `+n` side) and an
//! in-plane part `σ/4π Σ_e m_e ln((R_a + R_b + L)/(R_a + R_b - L))` with `m_e`
//! the in-plane outward normal of edge `e`.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};

use super::{FieldPoint, SINGULAR_DISTANCE};
use crate::error::Result;
use crate::geometry::BlockPolygon;
use crate::MU0;

/// Signed solid angle of triangle (a, b, c) seen from the origin; positive when
/// the origin lies on the side the counter-clockwise normal points to.
fn triangle_solid_angle(a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>) -> f64 {
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(&b.cross(&c));
    let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
    -2.0 * num.atan2(den)
}

/// H (A/m) at `r` of a planar polygon carrying uniform surface charge `sigma`.
///
/// `vertices` must be coplanar and ordered counter-clockwise about `normal`.
pub fn h_field_charged_polygon(vertices: &[Vector3<f64>], normal: Vector3<f64>, sigma: f64, r: Vector3<f64>) -> Vector3<f64> {
    if sigma == 0.0 {
        return Vector3::zeros();
    }
    let n = vertices.len();
    let rel: Vec<Vector3<f64>> = vertices.iter().map(|v| v - r).collect();
    let dist: Vec<f64> = rel.iter().map(|v| v.norm()).collect();

    let mut omega = 0.0;
    for k in 1..n - 1 {
        omega += triangle_solid_angle(rel[0], rel[k], rel[k + 1]);
    }

    let mut inplane = Vector3::zeros();
    for k in 0..n {
        let k1 = (k + 1) % n;
        let edge = vertices[k1] - vertices[k];
        let len = edge.norm();
        let outward = edge.cross(&normal) / len;
        let s = dist[k] + dist[k1];
        inplane += outward * ((s + len) / (s - len)).ln();
    }
    (normal * omega + inplane) * (sigma / (4.0 * PI))
}

fn lift(v: Vector2<f64>, z: f64) -> Vector3<f64> {
    Vector3::new(v.x, v.y, z)
}

/// H (A/m) of the prism `polygon × [z0, z1]` magnetized with `m`, valid off its
/// surface. Inside the prism the flux density is `μ0 (H + M)`.
pub fn h_field_3d(polygon: &BlockPolygon, z0: f64, z1: f64, m: Vector3<f64>, r: Vector3<f64>) -> Vector3<f64> {
    let mut h = Vector3::zeros();
    let ne = polygon.n_edges();
    for k in 0..ne {
        let (a, b) = polygon.edge(k);
        let t = b - a;
        let normal = Vector3::new(t.y, -t.x, 0.0) / t.norm();
        let sigma = m.dot(&normal);
        let facet = [lift(a, z0), lift(b, z0), lift(b, z1), lift(a, z1)];
        h += h_field_charged_polygon(&facet, normal, sigma, r);
    }
    if m.z != 0.0 {
        let top: Vec<_> = (0..ne).map(|k| lift(polygon.vertex(k), z1)).collect();
        h += h_field_charged_polygon(&top, Vector3::z(), m.z, r);
        let bottom: Vec<_> = (0..ne).rev().map(|k| lift(polygon.vertex(k), z0)).collect();
        h += h_field_charged_polygon(&bottom, -Vector3::z(), -m.z, r);
    }
    h
}

/// Flux density B (T) of one prism block at an air point outside it.
pub fn field_3d_block(polygon: &BlockPolygon, z0: f64, z1: f64, m: Vector3<f64>, point: &FieldPoint) -> Result<Vector3<f64>> {
    point.require_air()?;
    let r = point.xyz();
    let xy = point.xy();
    let inside_xy = polygon.contains(xy);
    let d_side = polygon.boundary_distance(xy);
    let in_slab = r.z > z0 && r.z < z1;
    if inside_xy && in_slab {
        return Err(point.region_error(format!("inside block {}", polygon.block_index)));
    }
    // Distance to the closed prism surface.
    let dz = if in_slab { 0.0 } else { (r.z - z0).abs().min((r.z - z1).abs()) };
    let dist = if inside_xy {
        dz
    } else if in_slab {
        d_side
    } else {
        d_side.hypot(dz)
    };
    if dist <= SINGULAR_DISTANCE {
        return Err(point.region_error(format!("on the surface of block {}", polygon.block_index)));
    }
    Ok(h_field_3d(polygon, z0, z1, m, r) * MU0)
}
