use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Region;
use crate::geometry::{block_center_angle, HalbachArray, N_BLOCKS, SECTOR_DEG};

/// Conforming triangulation of the truncated 2D domain with region tags.
#[derive(Clone, Debug)]
pub struct Mesh2D {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    /// Sorted indices of the nodes on the truncation boundary (`A_z = 0`).
    pub boundary: Vec<usize>,
    pub truncation_radius: f64,
    locator: Locator,
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<Region>,
    boundary: Vec<usize>,
    truncation_radius: f64,
}

impl Mesh2D {
    /// Validates and indexes a triangulation.
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
        mut boundary: Vec<usize>,
        truncation_radius: f64,
    ) -> Result<Self> {
        if regions.len() != triangles.len() {
            return Err(Error::Mesh(format!(
                "{} region tags for {} triangles",
                regions.len(),
                triangles.len()
            )));
        }
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::Mesh(format!("triangle {k} references a missing node")));
            }
            if signed_area(&nodes, t) <= 0.0 {
                return Err(Error::Mesh(format!("triangle {k} is degenerate or clockwise")));
            }
        }
        boundary.sort_unstable();
        boundary.dedup();
        if boundary.iter().any(|&i| i >= nodes.len()) {
            return Err(Error::Mesh("boundary references a missing node".into()));
        }
        if boundary.is_empty() {
            return Err(Error::Mesh("mesh has no Dirichlet boundary".into()));
        }
        let locator = Locator::new(&nodes, &triangles);
        Ok(Mesh2D {
            nodes,
            triangles,
            regions,
            boundary,
            truncation_radius,
            locator,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn node(&self, i: usize) -> Vector2<f64> {
        Vector2::from(self.nodes[i])
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.nodes, &self.triangles[t])
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.n_triangles())
            .filter(|&t| self.regions[t] == region)
            .map(|t| self.area(t))
            .sum()
    }

    pub fn has_iron(&self) -> bool {
        self.regions.contains(&Region::Iron)
    }

    /// Boundary flag per node.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_nodes()];
        for &i in &self.boundary {
            mask[i] = true;
        }
        mask
    }

    /// Triangle containing `p` and the barycentric coordinates of `p` in it.
    pub fn locate(&self, p: Vector2<f64>) -> Option<(usize, [f64; 3])> {
        self.locator.locate(&self.nodes, &self.triangles, p)
    }

    pub fn to_json(&self) -> Result<String> {
        let f = MeshFile {
            nodes: self.nodes.clone(),
            triangles: self.triangles.clone(),
            regions: self.regions.clone(),
            boundary: self.boundary.clone(),
            truncation_radius: self.truncation_radius,
        };
        Ok(serde_json::to_string(&f)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: MeshFile = serde_json::from_str(s)?;
        Self::from_parts(f.nodes, f.triangles, f.regions, f.boundary, f.truncation_radius)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

fn signed_area(nodes: &[[f64; 2]], t: &[usize; 3]) -> f64 {
    let [a, b, c] = t.map(|i| nodes[i]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn barycentric(nodes: &[[f64; 2]], t: &[usize; 3], p: Vector2<f64>) -> [f64; 3] {
    let [a, b, c] = t.map(|i| nodes[i]);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p.x - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p.y - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p.y - a[1]) - (p.x - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Uniform bucket grid over the mesh bounding box.
#[derive(Clone, Debug)]
struct Locator {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    fn new(nodes: &[[f64; 2]], triangles: &[[usize; 3]]) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for n in nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(n[k]);
                hi[k] = hi[k].max(n[k]);
            }
        }
        let w = (hi[0] - lo[0]).max(1e-12);
        let h = (hi[1] - lo[1]).max(1e-12);
        let target = (triangles.len().max(1) as f64 / 2.0).sqrt();
        let cell = (w * h).sqrt() / target.max(1.0);
        let nx = ((w / cell).ceil() as usize).clamp(1, 4096);
        let ny = ((h / cell).ceil() as usize).clamp(1, 4096);
        let mut buckets = vec![Vec::new(); nx * ny];
        let idx = |v: f64, o: f64, n: usize| (((v - o) / cell).floor().max(0.0) as usize).min(n - 1);
        for (k, t) in triangles.iter().enumerate() {
            let pts = t.map(|i| nodes[i]);
            let (x0, x1) = (pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max));
            let (y0, y1) = (pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max));
            for ix in idx(x0, lo[0], nx)..=idx(x1, lo[0], nx) {
                for iy in idx(y0, lo[1], ny)..=idx(y1, lo[1], ny) {
                    buckets[iy * nx + ix].push(k as u32);
                }
            }
        }
        Locator {
            origin: lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn locate(&self, nodes: &[[f64; 2]], triangles: &[[usize; 3]], p: Vector2<f64>) -> Option<(usize, [f64; 3])> {
        let fx = (p.x - self.origin[0]) / self.cell;
        let fy = (p.y - self.origin[1]) / self.cell;
        if !(fx >= -1e-9 && fy >= -1e-9) {
            return None;
        }
        let (ix, iy) = (fx.max(0.0) as usize, fy.max(0.0) as usize);
        if ix > self.nx || iy > self.ny {
            return None;
        }
        let (ix, iy) = (ix.min(self.nx - 1), iy.min(self.ny - 1));
        let tol = 1e-12;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &k in &self.buckets[iy * self.nx + ix] {
            let k = k as usize;
            let l = barycentric(nodes, &triangles[k], p);
            let worst = l.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= -tol {
                // Prefer the triangle that contains the point most robustly;
                // ties go to the lowest index so results are reproducible.
                if best.as_ref().is_none_or(|b| worst > b.2) {
                    best = Some((k, l, worst));
                }
                if worst > tol {
                    break;
                }
            }
        }
        best.map(|(k, l, _)| (k, l))
    }
}

/// Polygonal radius levels of the structured mesh and the target edge length at each.
struct Levels {
    rho: Vec<f64>,
    h: Vec<f64>,
}

fn uniform_levels(a: f64, b: f64, h: f64, out: &mut Levels) {
    let n = (((b - a) / h).ceil() as usize).max(1);
    for k in 1..=n {
        out.rho.push(if k == n { b } else { a + (b - a) * k as f64 / n as f64 });
        out.h.push(h);
    }
}

/// Exterior levels with edge length growing as `h (ρ/ρ_mat)²`.
fn graded_levels(rho_mat: f64, r_t: f64, h: f64, out: &mut Levels) {
    let total = rho_mat * rho_mat / h * (1.0 / rho_mat - 1.0 / r_t);
    let n = (total.ceil() as usize).max(1);
    for k in 1..=n {
        let rho = if k == n {
            r_t
        } else {
            1.0 / (1.0 / rho_mat - total * k as f64 / n as f64 * h / (rho_mat * rho_mat))
        };
        out.rho.push(rho);
        out.h.push(h * (rho / rho_mat).powi(2));
    }
}

/// Structured region-conforming mesh of the cross-section.
///
/// Every level is a regular 16-gon whose vertices share the block corner
/// directions, so block edges, the iron annulus and the truncation polygon are
/// unions of mesh edges. Adjacent levels are stitched sector by sector. The
/// edge length is `h` up to the outermost material and grows quadratically
/// with radius beyond it.
pub fn generate_mesh(array: &HalbachArray, h: f64, truncation_radius: f64) -> Result<Mesh2D> {
    let rho_mat = array.material_radius();
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Mesh(format!("target edge length must be positive, got {h}")));
    }
    if !(truncation_radius > rho_mat) {
        return Err(Error::Mesh(format!(
            "truncation radius {truncation_radius} must exceed the outermost material radius {rho_mat}"
        )));
    }
    let (ri, ro) = (array.inner_radius, array.outer_radius);
    let mut levels = Levels { rho: Vec::new(), h: Vec::new() };
    uniform_levels(0.0, ri, h, &mut levels);
    uniform_levels(ri, ro, h, &mut levels);
    if let Some(iron) = array.iron {
        if iron.inner_radius > ro {
            uniform_levels(ro, iron.inner_radius, h, &mut levels);
        }
        uniform_levels(iron.inner_radius, iron.outer_radius, h, &mut levels);
    }
    graded_levels(rho_mat, truncation_radius, h, &mut levels);

    let half = (SECTOR_DEG / 2.0).to_radians();
    let dirs: Vec<Vector2<f64>> = (1..=N_BLOCKS)
        .map(|i| {
            let a = block_center_angle(i).expect("valid block index").to_radians() - half;
            Vector2::new(a.cos(), a.sin())
        })
        .collect();
    let chord = 2.0 * (PI / N_BLOCKS as f64).sin();

    let mut nodes = vec![[0.0, 0.0]];
    let mut level_start = Vec::with_capacity(levels.rho.len());
    let mut level_segments = Vec::with_capacity(levels.rho.len());
    for (&rho, &hl) in levels.rho.iter().zip(&levels.h) {
        let n = ((rho * chord / hl).round() as usize).max(1);
        level_start.push(nodes.len());
        level_segments.push(n);
        for v in 0..N_BLOCKS {
            let (ea, eb) = (dirs[v], dirs[(v + 1) % N_BLOCKS]);
            for m in 0..n {
                let t = m as f64 / n as f64;
                let p = (ea * (1.0 - t) + eb * t) * rho;
                nodes.push([p.x, p.y]);
            }
        }
    }
    let id = |level: usize, v: usize, m: usize| -> usize {
        let n = level_segments[level];
        let (v, m) = if m == n { ((v + 1) % N_BLOCKS, 0) } else { (v, m) };
        level_start[level] + v * n + m
    };

    let region_of = |inner: f64, outer: f64, v: usize| -> Region {
        let mid = 0.5 * (inner + outer);
        if mid > ri && mid < ro {
            return Region::Magnet(v + 1);
        }
        if let Some(iron) = array.iron {
            if mid > iron.inner_radius && mid < iron.outer_radius {
                return Region::Iron;
            }
        }
        Region::Air
    };

    let mut triangles = Vec::new();
    let mut regions = Vec::new();
    let mut push = |tri: [usize; 3], region: Region, nodes: &[[f64; 2]]| {
        let t = if signed_area(nodes, &tri) < 0.0 { [tri[0], tri[2], tri[1]] } else { tri };
        triangles.push(t);
        regions.push(region);
    };
    for v in 0..N_BLOCKS {
        for m in 0..level_segments[0] {
            push([0, id(0, v, m), id(0, v, m + 1)], region_of(0.0, levels.rho[0], v), &nodes);
        }
    }
    for l in 0..levels.rho.len() - 1 {
        let (na, nb) = (level_segments[l], level_segments[l + 1]);
        for v in 0..N_BLOCKS {
            let region = region_of(levels.rho[l], levels.rho[l + 1], v);
            let (mut i, mut j) = (0, 0);
            while i < na || j < nb {
                let advance_inner = j == nb || (i < na && (i + 1) as f64 / na as f64 <= (j + 1) as f64 / nb as f64);
                if advance_inner {
                    push([id(l, v, i), id(l, v, i + 1), id(l + 1, v, j)], region, &nodes);
                    i += 1;
                } else {
                    push([id(l, v, i), id(l + 1, v, j + 1), id(l + 1, v, j)], region, &nodes);
                    j += 1;
                }
            }
        }
    }
    let last = levels.rho.len() - 1;
    let boundary: Vec<usize> = (level_start[last]..nodes.len()).collect();
    Mesh2D::from_parts(nodes, triangles, regions, boundary, truncation_radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_default_array, GeometryConfig};

    fn array() -> HalbachArray {
        build_default_array(&GeometryConfig::default()).unwrap()
    }

    #[test]
    fn refinement_scaling() {
        let a = array();
        let r_t = 3.0 * a.material_radius();
        let coarse = generate_mesh(&a, a.inner_radius / 5.0, r_t).unwrap();
        let fine = generate_mesh(&a, a.inner_radius / 10.0, r_t).unwrap();
        let ratio = fine.n_triangles() as f64 / coarse.n_triangles() as f64;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn block_and_iron_areas_are_exact() {
        let a = array();
        let m = generate_mesh(&a, a.inner_radius / 8.0, 0.75).unwrap();
        for (i, b) in a.blocks.iter().enumerate() {
            let area = m.region_area(Region::Magnet(i + 1));
            assert!((area - b.area()).abs() <= 1e-2 * b.area());
            assert!((area - b.area()).abs() <= 1e-12, "block {} area {area} vs {}", i + 1, b.area());
        }
        let iron = a.iron.unwrap();
        let expected = 8.0 * (PI / 8.0).sin() * (iron.outer_radius.powi(2) - iron.inner_radius.powi(2));
        assert!((m.region_area(Region::Iron) - expected).abs() < 1e-12);
    }

    #[test]
    fn magnet_triangles_inside_their_blocks() {
        let a = array();
        let m = generate_mesh(&a, a.inner_radius / 6.0, 0.75).unwrap();
        for (t, r) in m.triangles.iter().zip(&m.regions) {
            if let Region::Magnet(i) = r {
                let block = &a.blocks[i - 1];
                for &n in t {
                    let p = m.node(n);
                    assert!(block.contains(p) || block.boundary_distance(p) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn boundary_nodes_lie_on_truncation_polygon() {
        let a = array();
        let m = generate_mesh(&a, a.inner_radius / 6.0, 0.75).unwrap();
        let mask = m.boundary_mask();
        let apothem = 0.75 * (PI / 16.0).cos();
        for (i, _) in m.nodes.iter().enumerate() {
            let r = m.node(i).norm();
            if mask[i] {
                assert!(r >= apothem - 1e-12 && r <= 0.75 + 1e-12);
            } else {
                assert!(r < apothem - 1e-6, "interior node {i} on the wall");
            }
        }
    }

    #[test]
    fn triangles_cover_the_domain() {
        let a = array();
        let m = generate_mesh(&a, a.inner_radius / 5.0, 0.75).unwrap();
        let total: f64 = (0..m.n_triangles()).map(|t| m.area(t)).sum();
        let polygon = 0.5 * 16.0 * 0.75 * 0.75 * (2.0 * PI / 16.0).sin();
        assert!((total - polygon).abs() < 1e-10);
    }

    #[test]
    fn locate_points() {
        let a = array();
        let m = generate_mesh(&a, a.inner_radius / 5.0, 0.75).unwrap();
        for p in [Vector2::new(0.0, 0.0), Vector2::new(0.075, 0.01), Vector2::new(-0.15, 0.02), Vector2::new(0.3, -0.4)] {
            let (t, l) = m.locate(p).expect("inside");
            let q = m.node(m.triangles[t][0]) * l[0] + m.node(m.triangles[t][1]) * l[1] + m.node(m.triangles[t][2]) * l[2];
            assert!((q - p).norm() < 1e-12);
        }
        assert!(m.locate(Vector2::new(0.8, 0.0)).is_none());
    }

    #[test]
    fn bad_inputs() {
        let a = array();
        assert!(generate_mesh(&a, 0.0, 0.75).is_err());
        assert!(generate_mesh(&a, 0.01, 0.2).is_err());
    }

    #[test]
    fn json_round_trip() {
        let a = array();
        let m = generate_mesh(&a, a.inner_radius / 4.0, 0.75).unwrap();
        let back = Mesh2D::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.nodes, m.nodes);
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.regions, m.regions);
        assert_eq!(back.boundary, m.boundary);
    }

    #[test]
    fn mesh_without_iron() {
        let a = build_default_array(&GeometryConfig::default().without_iron()).unwrap();
        let m = generate_mesh(&a, a.inner_radius / 5.0, 0.6).unwrap();
        assert!(!m.has_iron());
    }
}
