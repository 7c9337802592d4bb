//! Field-quality harmonics of the nominal magnet on a reference circle, and
//! their change when one block is weakened by 1 %.

use halbach_bayes::field::AnalyticField;
use halbach_bayes::geometry::{build_default_array, nominal_parameter_vector, GeometryConfig, ParameterLayout};
use halbach_bayes::observables::{observe, ObservableSpec};

fn main() -> halbach_bayes::Result<()> {
    let array = build_default_array(&GeometryConfig::default())?;
    let layout = ParameterLayout::cross_section();
    let nominal = nominal_parameter_vector(&array, layout)?;
    let spec = ObservableSpec::fourier(0.075, 8, 60, vec![0.0]);

    let q0 = observe(&AnalyticField::new(&array, &nominal)?, &spec)?;
    let mut weak = nominal.clone();
    for c in 0..2 {
        weak.values[layout.index(4, 0, c)] *= 0.99;
    }
    let q1 = observe(&AnalyticField::new(&array, &weak)?, &spec)?;

    println!(" k        A_k [T]        B_k [T]   change in (A_k, B_k) after weakening block 5");
    for k in 1..=8 {
        println!(
            "{k:>2}  {:>+13.6e}  {:>+13.6e}   ({:+.3e}, {:+.3e})",
            q0[k - 1],
            q0[8 + k - 1],
            q1[k - 1] - q0[k - 1],
            q1[8 + k - 1] - q0[8 + k - 1]
        );
    }
    Ok(())
}
