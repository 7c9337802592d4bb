//! Samples the posterior of a linear problem with pCN chains and compares the
//! chain mean with the closed-form answer.

use halbach_bayes::field::assemble_linear_operator;
use halbach_bayes::geometry::{build_default_array, GeometryConfig, ParameterLayout};
use halbach_bayes::harness::{draw_ground_truth, make_observation, synthetic_prior, SyntheticPriorConfig};
use halbach_bayes::inference::{conjugate_update, run_parallel_chains, summarize_pooled, DiagonalNoise, PcnConfig};
use halbach_bayes::observables::{Component, ObservableSpec};

fn main() -> halbach_bayes::Result<()> {
    let array = build_default_array(&GeometryConfig::default())?;
    let layout = ParameterLayout::cross_section();
    let (prior, _) = synthetic_prior(&array, layout, &SyntheticPriorConfig::default())?;
    let spec = ObservableSpec::circle_points(0.09, 32, &[0.0], vec![Component::X, Component::Y]);
    let op = assemble_linear_operator(&array, &spec, layout)?;
    let truth = draw_ground_truth(&prior, layout, 3)?;
    let obs = make_observation(&op, &spec, &truth, &vec![3e-3; spec.len()], 3)?;
    let noise = DiagonalNoise::from_observation(&obs)?;
    let q = obs.values_vector();

    let chains = run_parallel_chains(&op, &prior, &q, &noise, &PcnConfig::new(0.2, 20_000, 0), &[1, 2, 3, 4])?;
    let summary = summarize_pooled(&chains, 0.1)?;
    let exact = conjugate_update(&op.matrix, &noise, &q, &prior)?;

    println!("acceptance {:.2}, ESS min {:.0} / max {:.0}", summary.acceptance_rate, summary.ess.min(), summary.ess.max());
    println!("coordinate   chain mean   conjugate mean   |diff| / MCSE");
    for (k, label) in layout.labels().iter().enumerate().take(6) {
        println!(
            "{label:>10} {:>12.1} {:>16.1} {:>15.2}",
            summary.mean[k],
            exact.mean()[k],
            (summary.mean[k] - exact.mean()[k]).abs() / summary.std_error[k]
        );
    }
    Ok(())
}
