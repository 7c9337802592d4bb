use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{MatMut, Side};
use nalgebra::{DVector, Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::material::Materials;
use super::mesh::{generate_mesh, Mesh2D};
use crate::error::{Error, Result};
use crate::field::{FieldPoint, Region};
use crate::geometry::{nominal_parameter_vector, HalbachArray, ParameterLayout, ParameterVector};
use crate::inference::ForwardModel;
use crate::observables::{observe, FieldEvaluator, ObservableSpec};
use crate::MU0;

const FIXED: usize = usize::MAX;

/// Floor of the adaptive relaxation weight.
const MIN_RELAXATION: f64 = 0.02;

/// Fixed-point iteration controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardOptions {
    /// Stop when `‖K(ν(A))A − f‖ / ‖f‖` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Largest weight of the new reluctivity in each update. The weight is
    /// halved whenever the residual grows and recovers while it shrinks.
    pub relaxation: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tolerance: 1e-8,
            max_iterations: 200,
            relaxation: 0.7,
        }
    }
}

/// Nodal vector potential and derived per-element quantities.
#[derive(Clone, Debug)]
pub struct FemSolution {
    /// `A_z` at every mesh node, zero on the truncation boundary.
    pub potential: Vec<f64>,
    /// Piecewise-constant flux density per triangle.
    pub element_b: Vec<Vector2<f64>>,
    /// Reluctivity used in the final linear solve.
    pub nu: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

impl FemSolution {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

/// Mesh-dependent data shared by every solve: DOF numbering, shape-function
/// gradients, the sparsity pattern and its symbolic Cholesky factorization.
#[derive(Clone, Debug)]
pub struct FemSystem {
    mesh: Mesh2D,
    dof: Vec<usize>,
    n_free: usize,
    grads: Vec<[Vector2<f64>; 3]>,
    areas: Vec<f64>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Position in the lower-triangle value array of each local entry `(a, b)`,
    /// or `FIXED` when it is not stored.
    slots: Vec<[usize; 9]>,
    symbolic: SymbolicLlt<usize>,
    node_elements: Vec<Vec<usize>>,
}

impl FemSystem {
    pub fn new(mesh: Mesh2D) -> Result<Self> {
        let mask = mesh.boundary_mask();
        let mut dof = vec![FIXED; mesh.n_nodes()];
        let mut n_free = 0;
        for (i, fixed) in mask.iter().enumerate() {
            if !fixed {
                dof[i] = n_free;
                n_free += 1;
            }
        }
        if n_free == 0 {
            return Err(Error::Mesh("mesh has no interior nodes".into()));
        }
        let mut grads = Vec::with_capacity(mesh.n_triangles());
        let mut areas = Vec::with_capacity(mesh.n_triangles());
        let mut node_elements = vec![Vec::new(); mesh.n_nodes()];
        for (e, t) in mesh.triangles.iter().enumerate() {
            let [a, b, c] = t.map(|i| mesh.node(i));
            let area = mesh.area(e);
            let g = |p: Vector2<f64>, q: Vector2<f64>| Vector2::new(p.y - q.y, q.x - p.x) / (2.0 * area);
            grads.push([g(b, c), g(c, a), g(a, b)]);
            areas.push(area);
            for &n in t {
                node_elements[n].push(e);
            }
        }

        let mut columns: Vec<Vec<usize>> = vec![Vec::new(); n_free];
        for t in &mesh.triangles {
            for &i in t {
                for &j in t {
                    let (r, c) = (dof[i], dof[j]);
                    if r != FIXED && c != FIXED && r >= c {
                        columns[c].push(r);
                    }
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n_free + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in &mut columns {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        let slots = mesh
            .triangles
            .iter()
            .map(|t| {
                let mut s = [FIXED; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        let (r, c) = (dof[t[a]], dof[t[b]]);
                        if r != FIXED && c != FIXED && r >= c {
                            let rows = &row_idx[col_ptr[c]..col_ptr[c + 1]];
                            s[3 * a + b] = col_ptr[c] + rows.binary_search(&r).expect("pattern entry");
                        }
                    }
                }
                s
            })
            .collect();
        let pattern = SymbolicSparseColMat::new_checked(n_free, n_free, col_ptr.clone(), None, row_idx.clone());
        let symbolic = SymbolicLlt::try_new(pattern.as_ref(), Side::Lower)
            .map_err(|e| Error::Singular(format!("symbolic factorization failed: {e:?}")))?;
        Ok(FemSystem {
            mesh,
            dof,
            n_free,
            grads,
            areas,
            col_ptr,
            row_idx,
            slots,
            symbolic,
            node_elements,
        })
    }

    pub fn mesh(&self) -> &Mesh2D {
        &self.mesh
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    fn assemble(&self, tensors: impl Fn(usize) -> Matrix2<f64>) -> Vec<f64> {
        let mut vals = vec![0.0; self.row_idx.len()];
        for (e, slots) in self.slots.iter().enumerate() {
            let d = tensors(e);
            let g = &self.grads[e];
            for a in 0..3 {
                let dg = d * g[a];
                for b in 0..3 {
                    let s = slots[3 * b + a];
                    if s != FIXED {
                        vals[s] += self.areas[e] * dg.dot(&g[b]);
                    }
                }
            }
        }
        vals
    }

    fn factor(&self, vals: Vec<f64>) -> Result<Llt<usize, f64>> {
        let pattern = SymbolicSparseColMat::new_checked(self.n_free, self.n_free, self.col_ptr.clone(), None, self.row_idx.clone());
        let mat = SparseColMat::new(pattern, vals);
        Llt::try_new_with_symbolic(self.symbolic.clone(), mat.as_ref(), Side::Lower)
            .map_err(|e| Error::Singular(format!("stiffness matrix factorization failed: {e:?}")))
    }

    /// Solves and scatters into a full nodal vector with zero boundary values.
    fn solve_with(&self, llt: &Llt<usize, f64>, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, self.n_free, 1));
        self.dof.iter().map(|&d| if d == FIXED { 0.0 } else { x[d] }).collect()
    }

    /// Weak-form load `∫ M_eff · curl v` over the magnet triangles, with
    /// `M_eff = M / μr`.
    pub fn source(&self, materials: &Materials, p: &ParameterVector) -> Result<Vec<f64>> {
        if p.layout.n_rings != 1 || p.layout.n_components < 2 {
            return Err(Error::Layout("the 2D model needs a single-ring layout with in-plane components".into()));
        }
        let mut f = vec![0.0; self.n_free];
        for (e, t) in self.mesh.triangles.iter().enumerate() {
            if let Region::Magnet(i) = self.mesh.regions[e] {
                let m = p.magnetization(i - 1, 0) / materials.magnet_mu_r;
                for a in 0..3 {
                    let d = self.dof[t[a]];
                    if d != FIXED {
                        let g = self.grads[e][a];
                        f[d] += self.areas[e] * (m.x * g.y - m.y * g.x);
                    }
                }
            }
        }
        Ok(f)
    }

    fn element_b(&self, potential: &[f64]) -> Vec<Vector2<f64>> {
        self.mesh
            .triangles
            .iter()
            .zip(&self.grads)
            .map(|(t, g)| {
                let grad = g[0] * potential[t[0]] + g[1] * potential[t[1]] + g[2] * potential[t[2]];
                Vector2::new(grad.y, -grad.x)
            })
            .collect()
    }

    fn reluctivities(&self, materials: &Materials, b: &[Vector2<f64>]) -> Vec<f64> {
        let nu_air = 1.0 / MU0;
        let nu_mag = materials.magnet_nu();
        self.mesh
            .regions
            .iter()
            .zip(b)
            .map(|(r, b)| match r {
                Region::Air => nu_air,
                Region::Magnet(_) => nu_mag,
                Region::Iron => materials.iron.nu(b.norm_squared()),
            })
            .collect()
    }

    /// `‖K(ν)A − f‖` computed element by element.
    fn residual_norm(&self, nu: &[f64], potential: &[f64], f: &[f64]) -> f64 {
        let mut r: Vec<f64> = f.iter().map(|v| -v).collect();
        for (e, t) in self.mesh.triangles.iter().enumerate() {
            let g = &self.grads[e];
            let grad = g[0] * potential[t[0]] + g[1] * potential[t[1]] + g[2] * potential[t[2]];
            for a in 0..3 {
                let d = self.dof[t[a]];
                if d != FIXED {
                    r[d] += self.areas[e] * nu[e] * g[a].dot(&grad);
                }
            }
        }
        r.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn is_linear(&self, materials: &Materials) -> bool {
        !self.mesh.has_iron() || materials.iron.is_linear()
    }

    /// Nonlinear magnetostatic solve by relaxed Picard iteration on the
    /// reluctivity. `initial_nu` seeds the first linear solve.
    pub fn solve(&self, materials: &Materials, p: &ParameterVector, options: &PicardOptions, initial_nu: Option<&[f64]>) -> Result<FemSolution> {
        materials.validate()?;
        let f = self.source(materials, p)?;
        let f_norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        let zero_b = vec![Vector2::zeros(); self.mesh.n_triangles()];
        let mut nu = match initial_nu {
            Some(v) if v.len() == self.mesh.n_triangles() => v.to_vec(),
            Some(v) => {
                return Err(Error::Dimension {
                    context: "initial reluctivity",
                    expected: self.mesh.n_triangles(),
                    got: v.len(),
                })
            }
            None => self.reluctivities(materials, &zero_b),
        };
        if f_norm == 0.0 {
            return Ok(FemSolution {
                potential: vec![0.0; self.mesh.n_nodes()],
                nu: self.reluctivities(materials, &zero_b),
                element_b: zero_b,
                iterations: 0,
                residual_history: vec![0.0],
            });
        }
        let linear = self.is_linear(materials);
        if linear {
            nu = self.reluctivities(materials, &zero_b);
        }
        let mut history = Vec::new();
        let mut w = options.relaxation;
        for it in 1..=options.max_iterations.max(1) {
            let llt = self.factor(self.assemble(|e| Matrix2::identity() * nu[e]))?;
            let potential = self.solve_with(&llt, &f);
            let b = self.element_b(&potential);
            let nu_new = self.reluctivities(materials, &b);
            let res = self.residual_norm(&nu_new, &potential, &f) / f_norm;
            history.push(res);
            log::trace!("picard iteration {it}: residual {res:.3e}");
            if res < options.tolerance || linear {
                return Ok(FemSolution {
                    potential,
                    element_b: b,
                    nu,
                    iterations: it,
                    residual_history: history,
                });
            }
            if history.len() >= 2 {
                w = if res > history[history.len() - 2] {
                    (0.5 * w).max(MIN_RELAXATION)
                } else {
                    (1.25 * w).min(options.relaxation)
                };
            }
            for (v, n) in nu.iter_mut().zip(&nu_new) {
                *v = (1.0 - w) * *v + w * n;
            }
        }
        Err(Error::NonConvergence {
            iterations: options.max_iterations,
            history,
        })
    }

    /// Linearized response `A'` to a magnetization perturbation `delta` about
    /// a converged state. Iron elements use the differential reluctivity
    /// tensor `ν I + 2 ν' ∇A ∇Aᵀ`.
    pub fn solve_sensitivity(&self, materials: &Materials, base: &FemSolution, delta: &ParameterVector) -> Result<FemSolution> {
        let f = self.source(materials, delta)?;
        let nu_mag = materials.magnet_nu();
        let tensors = |e: usize| -> Matrix2<f64> {
            match self.mesh.regions[e] {
                Region::Air => Matrix2::identity() / MU0,
                Region::Magnet(_) => Matrix2::identity() * nu_mag,
                Region::Iron => {
                    let b = base.element_b[e];
                    let grad_a = Vector2::new(-b.y, b.x);
                    let b2 = b.norm_squared();
                    Matrix2::identity() * materials.iron.nu(b2) + grad_a * grad_a.transpose() * (2.0 * materials.iron.dnu_db2(b2))
                }
            }
        };
        let llt = self.factor(self.assemble(tensors))?;
        let potential = self.solve_with(&llt, &f);
        let element_b = self.element_b(&potential);
        Ok(FemSolution {
            potential,
            element_b,
            nu: base.nu.clone(),
            iterations: 1,
            residual_history: Vec::new(),
        })
    }

    /// Flux density at `p` with region-aware patch recovery: vertex values are
    /// area-weighted averages of the same-region neighbours of the containing
    /// triangle, interpolated linearly.
    pub fn evaluate_b(&self, solution: &FemSolution, p: Vector2<f64>) -> Result<Vector2<f64>> {
        let (e, l) = self.mesh.locate(p).ok_or(Error::OutsideMesh(p.x, p.y))?;
        let region = self.mesh.regions[e];
        let mut b = Vector2::zeros();
        for (k, &n) in self.mesh.triangles[e].iter().enumerate() {
            let (mut acc, mut w) = (Vector2::zeros(), 0.0);
            for &f in &self.node_elements[n] {
                if self.mesh.regions[f] == region {
                    acc += solution.element_b[f] * self.areas[f];
                    w += self.areas[f];
                }
            }
            b += acc / w * l[k];
        }
        Ok(b)
    }

    /// Piecewise-constant flux density of the triangle containing `p`.
    pub fn evaluate_b_raw(&self, solution: &FemSolution, p: Vector2<f64>) -> Result<Vector2<f64>> {
        let (e, _) = self.mesh.locate(p).ok_or(Error::OutsideMesh(p.x, p.y))?;
        Ok(solution.element_b[e])
    }

    /// Binds a solution to this system as a [`FieldEvaluator`].
    pub fn field<'a>(&'a self, solution: &'a FemSolution) -> FemField<'a> {
        FemField { system: self, solution }
    }
}

/// Recovered finite-element flux density as a field evaluator (`B_z = 0`).
pub struct FemField<'a> {
    system: &'a FemSystem,
    solution: &'a FemSolution,
}

impl FieldEvaluator for FemField<'_> {
    fn flux_density(&self, point: &FieldPoint) -> Result<Vector3<f64>> {
        let b = self.system.evaluate_b(self.solution, point.xy())?;
        Ok(Vector3::new(b.x, b.y, 0.0))
    }
}

/// One-shot convenience: builds the system and solves with default options.
pub fn solve_magnetostatic(mesh: &Mesh2D, materials: &Materials, p: &ParameterVector) -> Result<FemSolution> {
    FemSystem::new(mesh.clone())?.solve(materials, p, &PicardOptions::default(), None)
}

/// Finite-element forward map `p ↦ q` for a fixed observable specification.
///
/// Every evaluation starts from the reluctivity of the nominal solution, so
/// the output depends only on `p`. Linear material sets reuse one numeric
/// factorization.
pub struct FemForward {
    system: FemSystem,
    materials: Materials,
    spec: ObservableSpec,
    layout: ParameterLayout,
    options: PicardOptions,
    warm_nu: Vec<f64>,
    linear_factor: Option<Llt<usize, f64>>,
}

impl FemForward {
    pub fn new(array: &HalbachArray, mesh: Mesh2D, materials: Materials, spec: ObservableSpec, options: PicardOptions) -> Result<Self> {
        if !spec.is_2d_compatible() {
            return Err(Error::Observable("the finite-element model only supports in-plane observables".into()));
        }
        spec.validate(Some(array))?;
        let layout = ParameterLayout::cross_section();
        let system = FemSystem::new(mesh)?;
        let nominal = nominal_parameter_vector(array, layout)?;
        let reference = system.solve(&materials, &nominal, &options, None)?;
        let linear_factor = if system.is_linear(&materials) {
            Some(system.factor(system.assemble(|e| Matrix2::identity() * reference.nu[e]))?)
        } else {
            None
        };
        Ok(FemForward {
            system,
            materials,
            spec,
            layout,
            options,
            warm_nu: reference.nu,
            linear_factor,
        })
    }

    /// Builds the default mesh for `array` with edge length `h` and a
    /// truncation radius of three times the outermost material radius.
    pub fn with_default_mesh(array: &HalbachArray, h: f64, materials: Materials, spec: ObservableSpec) -> Result<Self> {
        let mesh = generate_mesh(array, h, 3.0 * array.material_radius())?;
        Self::new(array, mesh, materials, spec, PicardOptions::default())
    }

    pub fn system(&self) -> &FemSystem {
        &self.system
    }

    pub fn spec(&self) -> &ObservableSpec {
        &self.spec
    }

    pub fn layout(&self) -> ParameterLayout {
        self.layout
    }

    pub fn materials(&self) -> &Materials {
        &self.materials
    }

    pub fn solve(&self, p: &ParameterVector) -> Result<FemSolution> {
        match &self.linear_factor {
            Some(llt) => {
                let f = self.system.source(&self.materials, p)?;
                let potential = self.system.solve_with(llt, &f);
                let element_b = self.system.element_b(&potential);
                Ok(FemSolution {
                    potential,
                    element_b,
                    nu: self.warm_nu.clone(),
                    iterations: 1,
                    residual_history: Vec::new(),
                })
            }
            None => self.system.solve(&self.materials, p, &self.options, Some(&self.warm_nu)),
        }
    }

    pub fn observe(&self, solution: &FemSolution) -> Result<DVector<f64>> {
        observe(&self.system.field(solution), &self.spec)
    }
}

impl ForwardModel for FemForward {
    fn input_dim(&self) -> usize {
        self.layout.dim()
    }

    fn output_dim(&self) -> usize {
        self.spec.len()
    }

    fn forward(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        let pv = ParameterVector::new(p.clone(), self.layout)?;
        self.observe(&self.solve(&pv)?)
    }
}

/// Free-function form of [`FemForward::forward`].
pub fn fem_forward(p: &ParameterVector, forward: &FemForward) -> Result<DVector<f64>> {
    forward.observe(&forward.solve(p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticField;
    use crate::fem::HbCurve;
    use crate::geometry::{build_default_array, GeometryConfig};

    fn air_array() -> HalbachArray {
        build_default_array(&GeometryConfig::default().without_iron()).unwrap()
    }

    fn iron_array() -> HalbachArray {
        build_default_array(&GeometryConfig::default()).unwrap()
    }

    fn nominal(array: &HalbachArray) -> ParameterVector {
        nominal_parameter_vector(array, ParameterLayout::cross_section()).unwrap()
    }

    fn bore_points(r: f64, n: usize) -> Vec<Vector2<f64>> {
        (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Vector2::new(r * t.cos(), r * t.sin())
            })
            .collect()
    }

    #[test]
    fn zero_magnetization_gives_zero_field() {
        let a = iron_array();
        let sys = FemSystem::new(generate_mesh(&a, 0.02, 0.75).unwrap()).unwrap();
        let p = ParameterVector::zeros(ParameterLayout::cross_section());
        let sol = sys.solve(&Materials::default(), &p, &PicardOptions::default(), None).unwrap();
        assert!(sol.potential.iter().all(|v| *v == 0.0));
        assert!(sol.element_b.iter().all(|b| b.norm() == 0.0));
    }

    #[test]
    fn linear_scaling_and_superposition() {
        let a = air_array();
        let sys = FemSystem::new(generate_mesh(&a, 0.02, 0.6).unwrap()).unwrap();
        let m = Materials::default();
        let p = nominal(&a);
        let base = sys.solve(&m, &p, &PicardOptions::default(), None).unwrap();
        let scaled = ParameterVector::new(&p.values * 2.5, p.layout).unwrap();
        let s = sys.solve(&m, &scaled, &PicardOptions::default(), None).unwrap();
        let amax = base.potential.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in base.potential.iter().zip(&s.potential) {
            assert!((2.5 * x - y).abs() <= 1e-10 * amax);
        }
    }

    #[test]
    fn uniform_gradient_gives_uniform_field() {
        let a = air_array();
        let sys = FemSystem::new(generate_mesh(&a, 0.03, 0.6).unwrap()).unwrap();
        let c = 0.37;
        let potential: Vec<f64> = sys.mesh().nodes.iter().map(|n| c * n[1]).collect();
        let b = sys.element_b(&potential);
        let sol = FemSolution {
            potential,
            element_b: b,
            nu: vec![],
            iterations: 0,
            residual_history: vec![],
        };
        for p in bore_points(0.05, 7) {
            let v = sys.evaluate_b(&sol, p).unwrap();
            assert!((v - Vector2::new(c, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn agrees_with_closed_form_without_iron() {
        // Convergence under refinement towards the surface-charge field in the bore.
        let a = air_array();
        let p = nominal(&a);
        let m = Materials::default();
        let analytic = AnalyticField::new(&a, &p).unwrap();
        let pts = bore_points(0.05, 24);
        let exact: Vec<Vector2<f64>> = pts
            .iter()
            .map(|q| analytic.flux_density(&FieldPoint::air(q.x, q.y, 0.0)).unwrap().xy())
            .collect();
        let scale = exact.iter().map(|b| b.norm()).fold(0.0, f64::max);
        let mut errors = Vec::new();
        for h in [a.inner_radius / 5.0, a.inner_radius / 10.0, a.inner_radius / 20.0] {
            let sys = FemSystem::new(generate_mesh(&a, h, 3.0 * a.material_radius()).unwrap()).unwrap();
            let sol = sys.solve(&m, &p, &PicardOptions::default(), None).unwrap();
            let err = pts
                .iter()
                .zip(&exact)
                .map(|(q, e)| (sys.evaluate_b(&sol, *q).unwrap() - e).norm())
                .fold(0.0, f64::max)
                / scale;
            errors.push(err);
        }
        assert!(errors[2] < 0.02, "errors {errors:?}");
        assert!(errors[2] < errors[0], "errors {errors:?}");
    }

    #[test]
    fn nonlinear_iron_converges_with_monotone_residual() {
        let a = iron_array();
        let sys = FemSystem::new(generate_mesh(&a, 0.01, 0.75).unwrap()).unwrap();
        let sol = sys.solve(&Materials::default(), &nominal(&a), &PicardOptions::default(), None).unwrap();
        assert!(sol.final_residual() < 1e-8);
        for w in sol.residual_history.windows(2).skip(4) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "history {:?}", sol.residual_history);
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let a = iron_array();
        let sys = FemSystem::new(generate_mesh(&a, 0.02, 0.75).unwrap()).unwrap();
        let opts = PicardOptions {
            tolerance: 1e-30,
            max_iterations: 3,
            relaxation: 0.7,
        };
        match sys.solve(&Materials::default(), &nominal(&a), &opts, None) {
            Err(Error::NonConvergence { iterations, history }) => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn block_perturbation(block: usize, m: Vector2<f64>) -> ParameterVector {
        let layout = ParameterLayout::cross_section();
        let mut d = ParameterVector::zeros(layout);
        d.values[layout.index(block - 1, 0, 0)] = m.x;
        d.values[layout.index(block - 1, 0, 1)] = m.y;
        d
    }

    #[test]
    fn linear_sensitivity_equals_forward_of_perturbation() {
        let a = iron_array();
        let sys = FemSystem::new(generate_mesh(&a, 0.02, 0.75).unwrap()).unwrap();
        let m = Materials::linear(1.0, 500.0);
        let base = sys.solve(&m, &nominal(&a), &PicardOptions::default(), None).unwrap();
        let delta = block_perturbation(13, Vector2::new(1.2e4, -3.0e3));
        let sens = sys.solve_sensitivity(&m, &base, &delta).unwrap();
        let direct = sys.solve(&m, &delta, &PicardOptions::default(), None).unwrap();
        let scale = direct.element_b.iter().map(|b| b.norm()).fold(0.0, f64::max);
        for (x, y) in sens.element_b.iter().zip(&direct.element_b) {
            assert!((x - y).norm() <= 1e-10 * scale);
        }
    }

    fn check_fd_sensitivity(materials: &Materials, p: &ParameterVector, tol: f64) {
        let a = iron_array();
        let sys = FemSystem::new(generate_mesh(&a, 0.015, 0.75).unwrap()).unwrap();
        let opts = PicardOptions {
            tolerance: 1e-12,
            max_iterations: 2000,
            ..Default::default()
        };
        let base = sys.solve(materials, p, &opts, None).unwrap();
        let delta = block_perturbation(13, Vector2::new(1.0e4, 4.0e3));
        let sens = sys.solve_sensitivity(materials, &base, &delta).unwrap();
        let step = 1.0;
        let shifted = |s: f64| {
            let q = ParameterVector::new(&p.values + &delta.values * s, p.layout).unwrap();
            sys.solve(materials, &q, &opts, Some(&base.nu)).unwrap()
        };
        let (plus, minus) = (shifted(step), shifted(-step));
        let pts: Vec<Vector2<f64>> = bore_points(0.05, 12).into_iter().chain(bore_points(0.215, 12)).collect();
        for q in pts {
            let fd = (sys.evaluate_b(&plus, q).unwrap() - sys.evaluate_b(&minus, q).unwrap()) / (2.0 * step);
            let lin = sys.evaluate_b(&sens, q).unwrap();
            assert!((fd - lin).norm() <= tol * lin.norm().max(1e-12), "at {q:?}: fd {fd:?} lin {lin:?}");
        }
    }

    #[test]
    fn nonlinear_sensitivity_matches_finite_differences() {
        let a = iron_array();
        check_fd_sensitivity(&Materials::default(), &nominal(&a), 1e-3);
    }

    #[test]
    fn driven_iron_sensitivity_matches_finite_differences() {
        // Uniform magnetization in every block leaks a strong dipole field into the iron.
        let a = iron_array();
        let layout = ParameterLayout::cross_section();
        let mut strong = ParameterVector::zeros(layout);
        for b in 0..16 {
            strong.values[layout.index(b, 0, 0)] = 5.0e5;
        }
        let sys = FemSystem::new(generate_mesh(&a, 0.015, 0.75).unwrap()).unwrap();
        let opts = PicardOptions {
            max_iterations: 1000,
            ..Default::default()
        };
        let sol = sys.solve(&Materials::default(), &strong, &opts, None).unwrap();
        let iron_nu: Vec<f64> = (0..sys.mesh().n_triangles())
            .filter(|&e| sys.mesh().regions[e] == Region::Iron)
            .map(|e| sol.nu[e])
            .collect();
        let (lo, hi) = iron_nu.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        assert!(hi / lo > 10.0, "iron reluctivity range {lo}..{hi}");
        check_fd_sensitivity(&Materials::default(), &strong, 1e-3);
    }

    #[test]
    fn single_block_sensitivity_points_along_perturbation_sector() {
        let a = air_array();
        let sys = FemSystem::new(generate_mesh(&a, 0.02, 0.6).unwrap()).unwrap();
        let m = Materials::default();
        let base = sys.solve(&m, &nominal(&a), &PicardOptions::default(), None).unwrap();
        let sens = sys.solve_sensitivity(&m, &base, &block_perturbation(13, Vector2::new(0.0, 1.0e4))).unwrap();
        // Block 13 sits at 270°. A radial perturbation charges its inner face, so
        // the response peaks on the bore circle right above it.
        let pts = bore_points(0.08, 64);
        let strongest = pts
            .iter()
            .max_by(|p, q| {
                let bp = sys.evaluate_b(&sens, **p).unwrap().norm();
                let bq = sys.evaluate_b(&sens, **q).unwrap().norm();
                bp.total_cmp(&bq)
            })
            .unwrap();
        let angle = strongest.y.atan2(strongest.x).to_degrees().rem_euclid(360.0);
        assert!((angle - 270.0).abs() <= 11.25 + 1e-9, "angle {angle}");
        let near = sys.evaluate_b(&sens, Vector2::new(0.0, -0.08)).unwrap().norm();
        let far = sys.evaluate_b(&sens, Vector2::new(0.0, 0.08)).unwrap().norm();
        assert!(near > 5.0 * far, "near {near} far {far}");
    }

    #[test]
    fn forward_model_is_deterministic() {
        let a = iron_array();
        let spec = ObservableSpec::fourier(0.05, 8, 60, vec![0.0]);
        let fwd = FemForward::with_default_mesh(&a, 0.02, Materials::default(), spec).unwrap();
        let p = nominal(&a).values * 1.01;
        let q1 = fwd.forward(&p).unwrap();
        let q2 = fwd.forward(&p).unwrap();
        assert_eq!(q1, q2);
        assert_eq!(q1.len(), 16);
    }

    #[test]
    fn dipole_dominates_nominal_harmonics() {
        let a = iron_array();
        let spec = ObservableSpec::fourier(0.05, 8, 60, vec![0.0]);
        let fwd = FemForward::with_default_mesh(&a, 0.01, Materials::default(), spec).unwrap();
        let q = fwd.forward(&nominal(&a).values).unwrap();
        // Rows are A1..A8 then B1..B8.
        let dipole = q[0].hypot(q[8]);
        for k in 1..8 {
            let hk = q[k].hypot(q[8 + k]);
            assert!(hk < 0.05 * dipole, "harmonic {} = {hk}, dipole {dipole}", k + 1);
        }
    }

    #[test]
    fn linear_forward_reuses_factorization() {
        let a = air_array();
        let spec = ObservableSpec::fourier(0.05, 4, 30, vec![0.0]);
        let fwd = FemForward::with_default_mesh(&a, 0.025, Materials::default(), spec.clone()).unwrap();
        let p = nominal(&a);
        let cached = fwd.forward(&p.values).unwrap();
        let sys = fwd.system();
        let fresh = sys.solve(&Materials::default(), &p, &PicardOptions::default(), None).unwrap();
        let direct = observe(&sys.field(&fresh), &spec).unwrap();
        assert!((cached - direct).amax() < 1e-12);
    }

    #[test]
    fn rejects_bad_layouts_and_points() {
        let a = air_array();
        let sys = FemSystem::new(generate_mesh(&a, 0.03, 0.6).unwrap()).unwrap();
        let p3 = ParameterVector::zeros(ParameterLayout::new(12, 3).unwrap());
        assert!(sys.solve(&Materials::default(), &p3, &PicardOptions::default(), None).is_err());
        let sol = sys.solve(&Materials::default(), &nominal(&a), &PicardOptions::default(), None).unwrap();
        assert!(matches!(sys.evaluate_b(&sol, Vector2::new(1.0, 0.0)), Err(Error::OutsideMesh(..))));
        let bad = Materials {
            magnet_mu_r: 0.5,
            iron: HbCurve::default(),
        };
        assert!(sys.solve(&bad, &nominal(&a), &PicardOptions::default(), None).is_err());
    }
}
