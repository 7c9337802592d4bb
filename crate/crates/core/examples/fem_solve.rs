//! Solves the nonlinear magnetostatic problem with the iron yoke and compares
//! the bore field with the closed-form model that ignores the yoke.

use halbach_bayes::fem::{generate_mesh, FemSystem, Materials, PicardOptions};
use halbach_bayes::field::{AnalyticField, FieldPoint};
use halbach_bayes::geometry::{build_default_array, nominal_parameter_vector, GeometryConfig, ParameterLayout};
use halbach_bayes::observables::FieldEvaluator;
use nalgebra::Vector2;

fn main() -> halbach_bayes::Result<()> {
    let array = build_default_array(&GeometryConfig::default())?;
    let p = nominal_parameter_vector(&array, ParameterLayout::cross_section())?;
    let mesh = generate_mesh(&array, 0.01, 3.0 * array.material_radius())?;
    println!("mesh: {} nodes, {} triangles", mesh.n_nodes(), mesh.n_triangles());

    let system = FemSystem::new(mesh)?;
    let solution = system.solve(&Materials::default(), &p, &PicardOptions::default(), None)?;
    println!("Picard iterations: {}, final residual {:.2e}", solution.iterations, solution.final_residual());

    let analytic = AnalyticField::new(&array, &p)?;
    for r in [0.0, 0.03, 0.06, 0.09] {
        let fem = system.evaluate_b(&solution, Vector2::new(r, 0.0))?;
        let free = analytic.flux_density(&FieldPoint::air(r, 0.0, 0.0))?;
        println!("x = {r:.2} m: with iron Bx = {:+.5} T, without iron Bx = {:+.5} T", fem.x, free.x);
    }
    Ok(())
}
