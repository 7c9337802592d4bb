//! Bayesian updating of the magnetization prior with field observations.
//!
//! The linear-Gaussian case has a closed-form posterior ([`conjugate_update`]).
//! For any other forward model, [`run_chain`] samples the posterior with a
//! preconditioned Crank–Nicolson Metropolis–Hastings chain.

mod conjugate;
mod pcn;
mod summary;

use nalgebra::DVector;

pub use conjugate::{conjugate_update, ConjugateSolver};
pub use pcn::{
    acceptance_probability, pcn_accept_prob, pcn_propose, pcn_propose_strict, run_chain, run_parallel_chains, Chain, PcnConfig,
    ProposalMode,
};
pub use summary::{summarize_chain, summarize_pooled, PosteriorSummary, MIN_RETAINED};

use crate::error::{Error, Result};
use crate::field::LinearOperator;
use crate::observables::Observation;

/// A map from parameter vectors to observable vectors.
pub trait ForwardModel {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn forward(&self, p: &DVector<f64>) -> Result<DVector<f64>>;
}

impl ForwardModel for LinearOperator {
    fn input_dim(&self) -> usize {
        self.ncols()
    }

    fn output_dim(&self) -> usize {
        self.nrows()
    }

    fn forward(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        self.apply(p)
    }
}

impl<F: ForwardModel + ?Sized> ForwardModel for &F {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }

    fn forward(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).forward(p)
    }
}

/// Independent Gaussian observation noise, `Σ = diag(σ²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalNoise {
    sigma: DVector<f64>,
}

impl DiagonalNoise {
    pub fn new(sigma: DVector<f64>) -> Result<Self> {
        if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Inference("noise standard deviations must be positive and finite".into()));
        }
        Ok(DiagonalNoise { sigma })
    }

    pub fn uniform(sigma: f64, n: usize) -> Result<Self> {
        Self::new(DVector::from_element(n, sigma))
    }

    pub fn from_observation(obs: &Observation) -> Result<Self> {
        Self::new(obs.sigma_vector())
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn inverse_variances(&self) -> DVector<f64> {
        self.sigma.map(|s| 1.0 / (s * s))
    }

    /// `‖r‖²_{Σ⁻¹}`.
    pub fn weighted_norm_squared(&self, r: &DVector<f64>) -> Result<f64> {
        if r.len() != self.len() {
            return Err(Error::Dimension {
                context: "residual",
                expected: self.len(),
                got: r.len(),
            });
        }
        Ok(r.iter().zip(self.sigma.iter()).map(|(ri, s)| (ri / s).powi(2)).sum())
    }
}

/// `-½ ‖q - q_obs‖²_{Σ⁻¹}` for an already evaluated forward output `q`.
pub fn log_likelihood_of_output(q: &DVector<f64>, q_obs: &DVector<f64>, noise: &DiagonalNoise) -> Result<f64> {
    if q.len() != q_obs.len() {
        return Err(Error::Dimension {
            context: "forward output",
            expected: q_obs.len(),
            got: q.len(),
        });
    }
    Ok(-0.5 * noise.weighted_norm_squared(&(q - q_obs))?)
}

/// Gaussian log-likelihood of `p`, without the normalization constant.
pub fn log_likelihood<F: ForwardModel + ?Sized>(p: &DVector<f64>, q_obs: &DVector<f64>, noise: &DiagonalNoise, forward: &F) -> Result<f64> {
    let q = forward.forward(p)?;
    log_likelihood_of_output(&q, q_obs, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    struct Identity(usize);

    impl ForwardModel for Identity {
        fn input_dim(&self) -> usize {
            self.0
        }
        fn output_dim(&self) -> usize {
            self.0
        }
        fn forward(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(p.clone())
        }
    }

    #[test]
    fn perfect_fit_is_zero() {
        let q = DVector::from_vec(vec![1.0, 2.0]);
        let noise = DiagonalNoise::uniform(0.5, 2).unwrap();
        assert_eq!(log_likelihood(&q, &q, &noise, &Identity(2)).unwrap(), 0.0);
    }

    #[test]
    fn single_residual() {
        let noise = DiagonalNoise::uniform(0.3, 1).unwrap();
        let l = log_likelihood(&DVector::from_element(1, 1.2), &DVector::from_element(1, 0.2), &noise, &Identity(1)).unwrap();
        assert!((l - (-1.0 / (2.0 * 0.09))).abs() < 1e-14);
    }

    #[test]
    fn matches_gaussian_density_ratio() {
        // log N(q_obs; H p1, Σ) - log N(q_obs; H p2, Σ) equals the difference of log-likelihoods.
        let sig = DVector::from_vec(vec![0.1, 0.2, 0.4]);
        let noise = DiagonalNoise::new(sig.clone()).unwrap();
        let q_obs = DVector::from_vec(vec![0.3, -0.1, 0.7]);
        let p1 = DVector::from_vec(vec![0.25, 0.0, 0.5]);
        let p2 = DVector::from_vec(vec![0.4, -0.3, 1.0]);
        let density = |mean: &DVector<f64>| {
            let cov = DMatrix::from_diagonal(&sig.map(|s| s * s));
            let r = &q_obs - mean;
            let norm = (2.0 * std::f64::consts::PI).powf(1.5) * cov.determinant().sqrt();
            (-0.5 * (r.transpose() * cov.try_inverse().unwrap() * &r)[0]).exp() / norm
        };
        let ratio = (density(&p1) / density(&p2)).ln();
        let diff = log_likelihood(&p1, &q_obs, &noise, &Identity(3)).unwrap() - log_likelihood(&p2, &q_obs, &noise, &Identity(3)).unwrap();
        assert!((ratio - diff).abs() < 1e-12 * ratio.abs());
    }

    #[test]
    fn noise_validation() {
        assert!(DiagonalNoise::uniform(0.0, 3).is_err());
        assert!(DiagonalNoise::new(DVector::from_vec(vec![1.0, f64::NAN])).is_err());
        let n = DiagonalNoise::uniform(2.0, 2).unwrap();
        assert!(n.weighted_norm_squared(&DVector::zeros(3)).is_err());
    }
}
