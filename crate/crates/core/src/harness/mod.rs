//! Synthetic-truth experiments and the error metrics they report.
//!
//! Every experiment is a pure function of its configuration and a seed. The
//! seed feeds one ChaCha stream per purpose (truth, noise, chain seeds, prior
//! shift), so changing one experiment step never perturbs another.

mod experiments;
mod metrics;
pub(crate) mod report;

pub use experiments::{
    run_application, run_linear_validation, run_pcn_validation, synthetic_prior, Application, ApplicationConfig, ApplicationReport,
    LinearValidation, LinearValidationConfig, LinearValidationOutcome, PcnForward, PcnValidation, PcnValidationConfig,
    ShiftPattern, SyntheticPriorConfig,
};
pub use metrics::{
    build_sigma_profile, max_abs_deviation, reduction_metric, reduction_metric_on, relative_error_profile, ring_reduction,
    RelativeErrorProfile, SigmaProfile, E_REL_FLOOR, SIGMA_FRINGE, SIGMA_HOMOGENEOUS,
};
pub use report::{ReportRow, ValidationReport};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{ParameterLayout, ParameterVector};
use crate::inference::ForwardModel;
use crate::observables::{ObservableSpec, Observation};
use crate::prior::GaussianDensity;

/// Independent random streams derived from one experiment seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Truth = 0,
    Noise = 1,
    Chains = 2,
    Shift = 3,
    NoiseFourier = 4,
    NoiseAxis = 5,
}

/// Generator for `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// One draw `p_true ~ N(μ0, C0)`.
pub fn draw_ground_truth(prior: &GaussianDensity, layout: ParameterLayout, seed: u64) -> Result<ParameterVector> {
    let mut rng = stream_rng(seed, Stream::Truth);
    ParameterVector::new(prior.sample(&mut rng), layout)
}

/// `clean + ε` with `ε_k ~ N(0, σ_k²)`. Zero entries of `sigma` add no noise.
pub fn add_noise(clean: &DVector<f64>, sigma: &[f64], seed: u64) -> Result<DVector<f64>> {
    add_noise_on(clean, sigma, seed, Stream::Noise)
}

/// [`add_noise`] drawing from an explicit stream.
pub fn add_noise_on(clean: &DVector<f64>, sigma: &[f64], seed: u64, stream: Stream) -> Result<DVector<f64>> {
    if sigma.len() != clean.len() {
        return Err(Error::Dimension {
            context: "noise levels",
            expected: clean.len(),
            got: sigma.len(),
        });
    }
    if sigma.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::Observable("noise standard deviations must be non-negative".into()));
    }
    let mut rng = stream_rng(seed, stream);
    Ok(DVector::from_fn(clean.len(), |k, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        clean[k] + sigma[k] * e
    }))
}

/// `q_obs = H(p_true) + ε` packaged with its noise model.
pub fn make_observation<F: ForwardModel + ?Sized>(
    forward: &F,
    spec: &ObservableSpec,
    p_true: &ParameterVector,
    sigma: &[f64],
    seed: u64,
) -> Result<Observation> {
    let clean = forward.forward(&p_true.values)?;
    let noisy = add_noise(&clean, sigma, seed)?;
    Observation::new(noisy.iter().copied().collect(), spec.clone(), sigma.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::LinearOperator;
    use crate::stats::{ks_test, mean_and_covariance, normal_cdf};
    use nalgebra::DMatrix;

    fn small_prior() -> GaussianDensity {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, -0.2, 0.0, -0.2, 0.5]);
        GaussianDensity::new(DVector::from_vec(vec![1.0, -1.0, 0.5]), a).unwrap()
    }

    #[test]
    fn zero_covariance_truth_is_the_mean() {
        let layout = ParameterLayout::cross_section();
        let mean = DVector::from_fn(32, |k, _| k as f64);
        let prior = GaussianDensity::with_jitter(mean.clone(), DMatrix::zeros(32, 32)).unwrap();
        let p = draw_ground_truth(&prior, layout, 5).unwrap();
        assert_eq!(p.values, mean);
    }

    #[test]
    fn truth_is_reproducible() {
        let layout = ParameterLayout::cross_section();
        let prior = GaussianDensity::new(DVector::zeros(32), DMatrix::identity(32, 32)).unwrap();
        assert_eq!(draw_ground_truth(&prior, layout, 9).unwrap(), draw_ground_truth(&prior, layout, 9).unwrap());
        assert_ne!(draw_ground_truth(&prior, layout, 9).unwrap(), draw_ground_truth(&prior, layout, 10).unwrap());
    }

    #[test]
    fn truth_draws_follow_the_prior_covariance() {
        let prior = small_prior();
        let draws: Vec<DVector<f64>> = (0..10_000).map(|s| prior.sample(&mut stream_rng(s, Stream::Truth))).collect();
        let (_, cov) = mean_and_covariance(&draws).unwrap();
        let rel = (&cov - prior.covariance()).norm() / prior.covariance().norm();
        assert!(rel < 0.05, "relative Frobenius error {rel}");
    }

    #[test]
    fn zero_noise_reproduces_the_forward_output() {
        let clean = DVector::from_vec(vec![0.1, -0.2, 0.3]);
        assert_eq!(add_noise(&clean, &[0.0; 3], 1).unwrap(), clean);
    }

    #[test]
    fn standardized_residuals_are_standard_normal() {
        let n = 1000;
        let clean = DVector::from_fn(n, |k, _| (k as f64).sin());
        let sigma: Vec<f64> = (0..n).map(|k| 1e-4 * (1.0 + (k % 3) as f64)).collect();
        let noisy = add_noise(&clean, &sigma, 42).unwrap();
        let z: Vec<f64> = (0..n).map(|k| (noisy[k] - clean[k]) / sigma[k]).collect();
        let (_, p) = ks_test(&z, normal_cdf).unwrap();
        assert!(p > 0.01, "KS p-value {p}");
    }

    #[test]
    fn observation_carries_sigma() {
        let layout = ParameterLayout::cross_section();
        let spec = ObservableSpec::fourier(0.05, 1, 8, vec![0.0]);
        let op = LinearOperator::new(DMatrix::from_element(2, 32, 1e-7), layout, spec.row_labels()).unwrap();
        let p = ParameterVector::new(DVector::from_element(32, 1.0), layout).unwrap();
        let obs = make_observation(&op, &spec, &p, &[1e-6, 2e-6], 3).unwrap();
        assert_eq!(obs.sigma, vec![1e-6, 2e-6]);
        assert!(make_observation(&op, &spec, &p, &[0.0, 0.0], 3).is_err());
    }
}
