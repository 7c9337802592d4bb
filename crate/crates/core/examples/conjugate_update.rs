//! Closed-form posterior for one synthetic truth: draw magnetizations from the
//! prior, simulate noisy bore measurements and update.

use halbach_bayes::field::assemble_linear_operator;
use halbach_bayes::geometry::{build_default_array, GeometryConfig, ParameterLayout};
use halbach_bayes::harness::{draw_ground_truth, make_observation, max_abs_deviation, synthetic_prior, SyntheticPriorConfig};
use halbach_bayes::inference::{conjugate_update, DiagonalNoise};
use halbach_bayes::observables::{Component, ObservableSpec};

fn main() -> halbach_bayes::Result<()> {
    let array = build_default_array(&GeometryConfig::default())?;
    let layout = ParameterLayout::cross_section();
    let (prior, _) = synthetic_prior(&array, layout, &SyntheticPriorConfig::default())?;
    let spec = ObservableSpec::circle_points(0.09, 32, &[0.0], vec![Component::X, Component::Y]);
    let op = assemble_linear_operator(&array, &spec, layout)?;

    let truth = draw_ground_truth(&prior, layout, 42)?;
    let obs = make_observation(&op, &spec, &truth, &vec![1e-4; spec.len()], 42)?;
    let posterior = conjugate_update(&op.matrix, &DiagonalNoise::from_observation(&obs)?, &obs.values_vector(), &prior)?;

    let before = max_abs_deviation(prior.mean(), &truth.values);
    let after = max_abs_deviation(posterior.mean(), &truth.values);
    println!("max |mean - truth|: prior {before:.1} A/m, posterior {after:.1} A/m ({:.1}% reduction)", 100.0 * (1.0 - after / before));
    let shrink = posterior.variances().component_div(&prior.variances());
    println!("posterior/prior variance ratio: min {:.3}, max {:.3}", shrink.min(), shrink.max());
    Ok(())
}
