//! Halbach cross-section, nominal magnetization and parameter layout.
//!
//! Blocks are numbered 1..=16 counter-clockwise, block 1 centered on the +x
//! axis. Each block is a trapezoid spanning 22.5° of the annulus
//! `[inner_radius, outer_radius]` with its vertices on the two circles, so
//! neighbouring blocks share their radial edges.

use nalgebra::{DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_BLOCKS: usize = 16;
pub const SECTOR_DEG: f64 = 360.0 / N_BLOCKS as f64;
pub const MIN_RINGS: usize = 12;
pub const MAX_RINGS: usize = 18;

/// Nominal magnetization angle of block `i` in degrees, in `[0, 360)`.
pub fn nominal_angle(i: usize) -> Result<f64> {
    if !(1..=N_BLOCKS).contains(&i) {
        return Err(Error::BlockIndex(i));
    }
    Ok((180.0 + 2.0 * (i - 1) as f64 * SECTOR_DEG).rem_euclid(360.0))
}

/// Angular position (degrees) of the centre of block `i`.
pub fn block_center_angle(i: usize) -> Result<f64> {
    if !(1..=N_BLOCKS).contains(&i) {
        return Err(Error::BlockIndex(i));
    }
    Ok((i - 1) as f64 * SECTOR_DEG)
}

fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

fn segments_intersect(p1: Vector2<f64>, p2: Vector2<f64>, q1: Vector2<f64>, q2: Vector2<f64>) -> bool {
    let d1 = cross(q2 - q1, p1 - q1);
    let d2 = cross(q2 - q1, p2 - q1);
    let d3 = cross(p2 - p1, q1 - p1);
    let d4 = cross(p2 - p1, q2 - p1);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// A simple, counter-clockwise polygon describing one block cross-section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolygon")]
pub struct BlockPolygon {
    pub block_index: usize,
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
struct RawPolygon {
    block_index: usize,
    vertices: Vec<[f64; 2]>,
}

impl TryFrom<RawPolygon> for BlockPolygon {
    type Error = Error;
    fn try_from(raw: RawPolygon) -> Result<Self> {
        BlockPolygon::new(raw.block_index, raw.vertices)
    }
}

impl BlockPolygon {
    pub fn new(block_index: usize, vertices: Vec<[f64; 2]>) -> Result<Self> {
        if !(1..=N_BLOCKS).contains(&block_index) {
            return Err(Error::BlockIndex(block_index));
        }
        if vertices.len() < 3 {
            return Err(Error::Geometry(format!(
                "block {block_index}: polygon needs at least 3 vertices"
            )));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Geometry(format!("block {block_index}: non-finite vertex")));
        }
        let poly = BlockPolygon {
            block_index,
            vertices,
        };
        let area = poly.signed_area();
        if area <= 0.0 {
            return Err(Error::Geometry(format!(
                "block {block_index}: signed area {area:.3e} must be positive (counter-clockwise)"
            )));
        }
        let n = poly.vertices.len();
        for e in 0..n {
            let (a, b) = poly.edge(e);
            for f in (e + 1)..n {
                if f == e + 1 || (e == 0 && f == n - 1) {
                    continue;
                }
                let (c, d) = poly.edge(f);
                if segments_intersect(a, b, c, d) {
                    return Err(Error::Geometry(format!(
                        "block {block_index}: edges {e} and {f} intersect"
                    )));
                }
            }
        }
        Ok(poly)
    }

    pub fn vertex(&self, k: usize) -> Vector2<f64> {
        let v = self.vertices[k % self.vertices.len()];
        Vector2::new(v[0], v[1])
    }

    /// Edge `k` as (start, end).
    pub fn edge(&self, k: usize) -> (Vector2<f64>, Vector2<f64>) {
        (self.vertex(k), self.vertex(k + 1))
    }

    pub fn n_edges(&self) -> usize {
        self.vertices.len()
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n).map(|k| cross(self.vertex(k), self.vertex(k + 1))).sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Vector2<f64> {
        let n = self.vertices.len();
        let mut c = Vector2::zeros();
        for k in 0..n {
            let (a, b) = self.edge(k);
            c += (a + b) * cross(a, b);
        }
        c / (6.0 * self.signed_area())
    }

    /// Even-odd point-in-polygon test. Boundary points give an unspecified answer;
    /// pair with [`Self::boundary_distance`] when that matters.
    pub fn contains(&self, p: Vector2<f64>) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for k in 0..n {
            let (a, b) = self.edge(k);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn boundary_distance(&self, p: Vector2<f64>) -> f64 {
        (0..self.n_edges())
            .map(|k| {
                let (a, b) = self.edge(k);
                segment_distance(p, a, b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Polygon rotated about the origin by `angle` radians.
    pub fn rotated(&self, angle: f64, block_index: usize) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let vertices = self
            .vertices
            .iter()
            .map(|v| [c * v[0] - s * v[1], s * v[0] + c * v[1]])
            .collect();
        BlockPolygon::new(block_index, vertices)
    }
}

fn default_inner() -> f64 {
    0.1
}
fn default_outer() -> f64 {
    0.2
}
fn default_ring_length() -> f64 {
    0.1
}
fn default_n_rings() -> usize {
    12
}
fn default_moment() -> f64 {
    330.0
}
fn default_mu_r() -> f64 {
    1.0
}
fn default_iron_inner() -> Option<f64> {
    Some(0.21)
}
fn default_iron_outer() -> Option<f64> {
    Some(0.25)
}

/// Geometry block of the run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "default_inner")]
    pub inner_radius_m: f64,
    #[serde(default = "default_outer")]
    pub outer_radius_m: f64,
    #[serde(default = "default_ring_length")]
    pub ring_length_m: f64,
    #[serde(default)]
    pub ring_gap_m: f64,
    #[serde(default = "default_n_rings")]
    pub n_rings: usize,
    #[serde(default = "default_moment", rename = "nominal_moment_Am2")]
    pub nominal_moment_am2: f64,
    #[serde(default = "default_mu_r")]
    pub mu_r: f64,
    #[serde(default = "default_iron_inner")]
    pub iron_inner_m: Option<f64>,
    #[serde(default = "default_iron_outer")]
    pub iron_outer_m: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            inner_radius_m: default_inner(),
            outer_radius_m: default_outer(),
            ring_length_m: default_ring_length(),
            ring_gap_m: 0.0,
            n_rings: default_n_rings(),
            nominal_moment_am2: default_moment(),
            mu_r: default_mu_r(),
            iron_inner_m: default_iron_inner(),
            iron_outer_m: default_iron_outer(),
        }
    }
}

impl GeometryConfig {
    pub fn without_iron(mut self) -> Self {
        self.iron_inner_m = None;
        self.iron_outer_m = None;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IronRing {
    pub inner_radius: f64,
    pub outer_radius: f64,
}

/// Full description of one Halbach dipole: cross-section, axial stacking and
/// nominal magnetization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalbachArray {
    pub blocks: Vec<BlockPolygon>,
    pub n_rings: usize,
    pub ring_length: f64,
    pub ring_gap: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub iron: Option<IronRing>,
    pub nominal_moment: f64,
    pub mu_r: f64,
}

/// Builds the default trapezoidal-wedge array described by `config`.
pub fn build_default_array(config: &GeometryConfig) -> Result<HalbachArray> {
    let ri = config.inner_radius_m;
    let ro = config.outer_radius_m;
    if !(ri > 0.0 && ri < ro && ro.is_finite()) {
        return Err(Error::Geometry(format!(
            "radii must satisfy 0 < inner ({ri}) < outer ({ro})"
        )));
    }
    if !(config.ring_length_m > 0.0) || !(config.ring_gap_m >= 0.0) {
        return Err(Error::Geometry("ring length must be > 0 and ring gap >= 0".into()));
    }
    if !(MIN_RINGS..=MAX_RINGS).contains(&config.n_rings) {
        return Err(Error::Geometry(format!(
            "n_rings = {} outside {MIN_RINGS}..={MAX_RINGS}",
            config.n_rings
        )));
    }
    if !(config.mu_r > 0.0) || !config.nominal_moment_am2.is_finite() {
        return Err(Error::Geometry("mu_r must be positive and the moment finite".into()));
    }
    let iron = match (config.iron_inner_m, config.iron_outer_m) {
        (None, None) => None,
        (Some(a), Some(b)) => {
            if !(ro <= a && a < b) {
                return Err(Error::Geometry(format!(
                    "iron radii must satisfy outer ({ro}) <= iron_inner ({a}) < iron_outer ({b})"
                )));
            }
            Some(IronRing {
                inner_radius: a,
                outer_radius: b,
            })
        }
        _ => {
            return Err(Error::Geometry(
                "iron_inner_m and iron_outer_m must be given together".into(),
            ))
        }
    };

    let half = (SECTOR_DEG / 2.0).to_radians();
    let mut blocks = Vec::with_capacity(N_BLOCKS);
    for i in 1..=N_BLOCKS {
        let phi = block_center_angle(i)?.to_radians();
        let (a, b) = (phi - half, phi + half);
        let vertices = vec![
            [ri * a.cos(), ri * a.sin()],
            [ro * a.cos(), ro * a.sin()],
            [ro * b.cos(), ro * b.sin()],
            [ri * b.cos(), ri * b.sin()],
        ];
        blocks.push(BlockPolygon::new(i, vertices)?);
    }
    Ok(HalbachArray {
        blocks,
        n_rings: config.n_rings,
        ring_length: config.ring_length_m,
        ring_gap: config.ring_gap_m,
        inner_radius: ri,
        outer_radius: ro,
        iron,
        nominal_moment: config.nominal_moment_am2,
        mu_r: config.mu_r,
    })
}

impl HalbachArray {
    pub fn block(&self, i: usize) -> Result<&BlockPolygon> {
        if !(1..=N_BLOCKS).contains(&i) {
            return Err(Error::BlockIndex(i));
        }
        Ok(&self.blocks[i - 1])
    }

    pub fn block_volume(&self, i: usize) -> Result<f64> {
        Ok(self.block(i)?.area() * self.ring_length)
    }

    pub fn total_length(&self) -> f64 {
        self.n_rings as f64 * self.ring_length + (self.n_rings - 1) as f64 * self.ring_gap
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.total_length()
    }

    /// Axial extent `(z0, z1)` of ring `j` (1-based); the stack is centred on z = 0.
    pub fn ring_extent(&self, j: usize) -> Result<(f64, f64)> {
        if !(1..=self.n_rings).contains(&j) {
            return Err(Error::Layout(format!(
                "ring index {j} outside 1..={}",
                self.n_rings
            )));
        }
        let z0 = -self.half_length() + (j - 1) as f64 * (self.ring_length + self.ring_gap);
        Ok((z0, z0 + self.ring_length))
    }

    /// True when `xy` lies inside (or within `tol` of) any block polygon.
    pub fn in_magnet(&self, xy: Vector2<f64>, tol: f64) -> bool {
        self.blocks
            .iter()
            .any(|b| b.contains(xy) || b.boundary_distance(xy) <= tol)
    }

    /// Outermost material radius: iron outer radius if present, else magnet outer radius.
    pub fn material_radius(&self) -> f64 {
        self.iron.map_or(self.outer_radius, |r| r.outer_radius)
    }
}

/// Nominal magnetization of block `i` in A/m (z-component zero).
pub fn nominal_magnetization(array: &HalbachArray, i: usize) -> Result<Vector3<f64>> {
    let vol = array.block_volume(i)?;
    if !(vol > 0.0) {
        return Err(Error::Geometry(format!("block {i} has zero volume")));
    }
    let alpha = nominal_angle(i)?.to_radians();
    let scale = array.nominal_moment / vol;
    Ok(Vector3::new(scale * alpha.cos(), scale * alpha.sin(), 0.0))
}

/// Bijective map between (block, ring, component) and flat parameter index.
///
/// Flat order is ring-major: `((ring * 16) + block) * n_components + component`,
/// all indices 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterLayout {
    pub n_blocks: usize,
    pub n_rings: usize,
    pub n_components: usize,
}

const COMPONENT_NAMES: [&str; 3] = ["x", "y", "z"];

impl ParameterLayout {
    pub fn new(n_rings: usize, n_components: usize) -> Result<Self> {
        if n_rings == 0 {
            return Err(Error::Layout("n_rings must be positive".into()));
        }
        if !(2..=3).contains(&n_components) {
            return Err(Error::Layout(format!(
                "n_components must be 2 or 3, got {n_components}"
            )));
        }
        Ok(ParameterLayout {
            n_blocks: N_BLOCKS,
            n_rings,
            n_components,
        })
    }

    /// The single-section 2D layout (16 blocks, x and y).
    pub fn cross_section() -> Self {
        ParameterLayout {
            n_blocks: N_BLOCKS,
            n_rings: 1,
            n_components: 2,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_blocks * self.n_rings * self.n_components
    }

    pub fn is_2d(&self) -> bool {
        self.n_components == 2
    }

    /// Flat index of 0-based `(block, ring, component)`.
    pub fn index(&self, block: usize, ring: usize, component: usize) -> usize {
        debug_assert!(block < self.n_blocks && ring < self.n_rings && component < self.n_components);
        (ring * self.n_blocks + block) * self.n_components + component
    }

    /// Inverse of [`Self::index`].
    pub fn unflatten(&self, flat: usize) -> (usize, usize, usize) {
        let component = flat % self.n_components;
        let rest = flat / self.n_components;
        (rest % self.n_blocks, rest / self.n_blocks, component)
    }

    /// Flat indices belonging to 0-based ring `ring`.
    pub fn ring_indices(&self, ring: usize) -> std::ops::Range<usize> {
        let per_ring = self.n_blocks * self.n_components;
        ring * per_ring..(ring + 1) * per_ring
    }

    /// Human-readable labels such as `Mx_b1_r1` (1-based block and ring).
    pub fn labels(&self) -> Vec<String> {
        (0..self.dim())
            .map(|k| {
                let (b, r, c) = self.unflatten(k);
                format!("M{}_b{}_r{}", COMPONENT_NAMES[c], b + 1, r + 1)
            })
            .collect()
    }

    fn check_array(&self, array: &HalbachArray) -> Result<()> {
        if self.n_blocks != N_BLOCKS {
            return Err(Error::Layout(format!("layout has {} blocks", self.n_blocks)));
        }
        if self.n_rings != array.n_rings && self.n_rings != 1 {
            return Err(Error::Layout(format!(
                "layout has {} rings but the array has {}",
                self.n_rings, array.n_rings
            )));
        }
        Ok(())
    }
}

/// Flat magnetization vector (A/m) tied to its layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    pub values: DVector<f64>,
    pub layout: ParameterLayout,
}

impl ParameterVector {
    pub fn new(values: DVector<f64>, layout: ParameterLayout) -> Result<Self> {
        if values.len() != layout.dim() {
            return Err(Error::Dimension {
                context: "parameter vector",
                expected: layout.dim(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Layout("parameter vector has non-finite entries".into()));
        }
        Ok(ParameterVector { values, layout })
    }

    pub fn zeros(layout: ParameterLayout) -> Self {
        ParameterVector {
            values: DVector::zeros(layout.dim()),
            layout,
        }
    }

    /// Magnetization of 0-based `(block, ring)` as a 3-vector (z = 0 in 2D layouts).
    pub fn magnetization(&self, block: usize, ring: usize) -> Vector3<f64> {
        let mut m = Vector3::zeros();
        for c in 0..self.layout.n_components {
            m[c] = self.values[self.layout.index(block, ring, c)];
        }
        m
    }
}

/// Nominal parameter vector: the same block-type magnetization in every ring.
pub fn nominal_parameter_vector(array: &HalbachArray, layout: ParameterLayout) -> Result<ParameterVector> {
    layout.check_array(array)?;
    let mut p = ParameterVector::zeros(layout);
    for i in 0..N_BLOCKS {
        let m = nominal_magnetization(array, i + 1)?;
        for j in 0..layout.n_rings {
            for c in 0..layout.n_components {
                p.values[layout.index(i, j, c)] = m[c];
            }
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_array() -> HalbachArray {
        build_default_array(&GeometryConfig::default()).unwrap()
    }

    #[test]
    fn nominal_angles() {
        assert_eq!(nominal_angle(1).unwrap(), 180.0);
        assert_eq!(nominal_angle(2).unwrap(), 225.0);
        assert_eq!(nominal_angle(5).unwrap(), 0.0);
        assert_eq!(nominal_angle(9).unwrap(), 180.0);
        assert!(nominal_angle(0).is_err());
        assert!(nominal_angle(17).is_err());
        for i in 1..=16 {
            let a = nominal_angle(i).unwrap();
            assert!((0.0..360.0).contains(&a));
        }
    }

    #[test]
    fn nominal_magnetization_unit_volume() {
        // A single square metre block with unit ring length has volume 1 m³.
        let mut array = default_array();
        let side = 1.0;
        array.ring_length = 1.0;
        array.blocks[0] =
            BlockPolygon::new(1, vec![[2.0, 0.0], [2.0 + side, 0.0], [2.0 + side, side], [2.0, side]]).unwrap();
        let m = nominal_magnetization(&array, 1).unwrap();
        assert!((m - Vector3::new(-330.0, 0.0, 0.0)).norm() < 1e-9);

        array.nominal_moment = 0.0;
        assert_eq!(nominal_magnetization(&array, 1).unwrap(), Vector3::zeros());
    }

    #[test]
    fn nominal_magnetization_block5() {
        let mut array = default_array();
        // Scale ring length so that vol(D_5) = 3.3e-4 m³.
        array.ring_length = 3.3e-4 / array.blocks[4].area();
        let m = nominal_magnetization(&array, 5).unwrap();
        assert!((m.x - 1e6).abs() < 1e-6 * 1e6);
        assert!(m.y.abs() < 1e-9 * 1e6);
    }

    #[test]
    fn default_array_shape() {
        let array = default_array();
        assert_eq!(array.blocks.len(), 16);
        for (k, b) in array.blocks.iter().enumerate() {
            assert_eq!(b.block_index, k + 1);
            let v0 = b.vertex(0);
            let v3 = b.vertex(3);
            let span = (v3.y.atan2(v3.x) - v0.y.atan2(v0.x)).rem_euclid(2.0 * std::f64::consts::PI);
            assert!((span.to_degrees() - 22.5).abs() < 1e-12);
            for v in &b.vertices {
                let r = v[0].hypot(v[1]);
                assert!(r >= array.inner_radius - 1e-12 && r <= array.outer_radius + 1e-12);
            }
        }
        // Zero clearance: shared radial edges.
        for i in 0..16 {
            let a = &array.blocks[i];
            let b = &array.blocks[(i + 1) % 16];
            assert!((a.vertex(2) - b.vertex(1)).norm() < 1e-12);
            assert!((a.vertex(3) - b.vertex(0)).norm() < 1e-12);
        }
        let layout = ParameterLayout::new(12, 3).unwrap();
        assert_eq!(layout.dim(), 576);
    }

    #[test]
    fn inconsistent_radii_rejected() {
        let mut cfg = GeometryConfig::default();
        cfg.inner_radius_m = 0.3;
        assert!(build_default_array(&cfg).is_err());
        let mut cfg = GeometryConfig::default();
        cfg.iron_inner_m = Some(0.15);
        assert!(build_default_array(&cfg).is_err());
        let mut cfg = GeometryConfig::default();
        cfg.n_rings = 11;
        assert!(build_default_array(&cfg).is_err());
        let mut cfg = GeometryConfig::default();
        cfg.iron_outer_m = None;
        assert!(build_default_array(&cfg).is_err());
    }

    #[test]
    fn rotational_symmetry() {
        let array = default_array();
        let step = SECTOR_DEG.to_radians();
        for i in 0..16 {
            let rotated = array.blocks[i].rotated(step, (i + 1) % 16 + 1).unwrap();
            let target = &array.blocks[(i + 1) % 16];
            for k in 0..4 {
                assert!((rotated.vertex(k) - target.vertex(k)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn total_transverse_moment_matches_direct_sum() {
        let array = default_array();
        // Oracle: direct 16-term sum of m̄ (cos α_i, sin α_i).
        let mut oracle = Vector2::zeros();
        for i in 1..=16 {
            let a = (180.0 + 2.0 * (i as f64 - 1.0) * 22.5_f64).to_radians();
            oracle += Vector2::new(a.cos(), a.sin()) * 330.0;
        }
        let mut total = Vector3::zeros();
        for i in 1..=16 {
            total += nominal_magnetization(&array, i).unwrap() * array.block_volume(i).unwrap();
        }
        assert!((total.xy() - oracle).norm() < 1e-9);
        // For this angle pattern the sum vanishes.
        assert!(oracle.norm() < 1e-10);
    }

    #[test]
    fn nominal_vector_is_ring_independent() {
        let array = default_array();
        let layout = ParameterLayout::new(12, 3).unwrap();
        let p = nominal_parameter_vector(&array, layout).unwrap();
        for i in 0..16 {
            let m0 = p.magnetization(i, 0);
            for j in 1..12 {
                assert_eq!(p.magnetization(i, j), m0);
            }
        }
        // Blocks 1 and 9 both point along -x.
        assert!(p.values[layout.index(0, 0, 0)] < 0.0);
        assert!(p.values[layout.index(8, 0, 0)] < 0.0);
        let p2 = nominal_parameter_vector(&array, ParameterLayout::new(12, 2).unwrap()).unwrap();
        assert_eq!(p2.values.len(), 16 * 12 * 2);
        assert!(nominal_parameter_vector(&array, ParameterLayout::new(13, 3).unwrap()).is_err());
    }

    #[test]
    fn layout_round_trip() {
        for (r, c) in [(1, 2), (12, 3), (18, 2)] {
            let l = ParameterLayout::new(r, c).unwrap();
            for k in 0..l.dim() {
                let (b, j, cc) = l.unflatten(k);
                assert_eq!(l.index(b, j, cc), k);
            }
        }
        assert!(ParameterLayout::new(12, 4).is_err());
    }

    #[test]
    fn polygon_validation() {
        assert!(BlockPolygon::new(1, vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
        assert!(BlockPolygon::new(1, vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(BlockPolygon::new(1, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).is_ok());
        let json = r#"{"block_index":1,"vertices":[[0,0],[0,1],[1,0]]}"#;
        assert!(serde_json::from_str::<BlockPolygon>(json).is_err());
    }
}
