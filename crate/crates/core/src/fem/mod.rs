//! Two-dimensional magnetostatic finite elements in the vector potential `A_z`.
//!
//! Linear triangles on a region-conforming mesh of the truncated
//! cross-section, homogeneous Dirichlet conditions on the outer boundary,
//! permanent magnets as equivalent magnetization sources and an optional
//! nonlinear soft-iron ring.

mod material;
mod mesh;
mod solver;

pub use material::{nu0, HbCurve, Materials, SampledCurve};
pub use mesh::{generate_mesh, Mesh2D};
pub use solver::{fem_forward, solve_magnetostatic, FemField, FemForward, FemSolution, FemSystem, PicardOptions};
