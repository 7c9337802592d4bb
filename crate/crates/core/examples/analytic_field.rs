//! Evaluates the closed-form field of the nominal array in 2D and 3D and
//! assembles the linear operator from magnetizations to bore measurements.

use halbach_bayes::field::{assemble_linear_operator, AnalyticField, FieldPoint};
use halbach_bayes::geometry::{build_default_array, nominal_parameter_vector, GeometryConfig, ParameterLayout};
use halbach_bayes::observables::{Component, FieldEvaluator, ObservableSpec};

fn main() -> halbach_bayes::Result<()> {
    let array = build_default_array(&GeometryConfig::default())?;

    let p2 = nominal_parameter_vector(&array, ParameterLayout::cross_section())?;
    let field2 = AnalyticField::new(&array, &p2)?;
    let p3 = nominal_parameter_vector(&array, ParameterLayout::new(array.n_rings, 3)?)?;
    let field3 = AnalyticField::new(&array, &p3)?;

    let b2 = field2.flux_density(&FieldPoint::air(0.0, 0.0, 0.0))?;
    println!("2D cross-section: Bx at the centre = {:+.5} T", b2.x);
    println!("3D magnet, Bx along the axis (half length {} m):", array.half_length());
    for z in [0.0, 0.2, 0.4, 0.55, 0.6, 0.7, 0.8] {
        let b3 = field3.flux_density(&FieldPoint::air(0.0, 0.0, z))?;
        println!("  z = {z:>4.2} m   {:+.5} T", b3.x);
    }

    let spec = ObservableSpec::circle_points(0.09, 32, &[0.0], vec![Component::X, Component::Y]);
    let op = assemble_linear_operator(&array, &spec, ParameterLayout::cross_section())?;
    let q = op.evaluate(&p2)?;
    println!("operator {}x{}; first rows: {:?}", op.nrows(), op.ncols(), &q.as_slice()[..4]);
    Ok(())
}
