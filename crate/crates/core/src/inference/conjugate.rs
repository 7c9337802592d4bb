use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::DiagonalNoise;
use crate::error::{Error, Result};
use crate::prior::{min_eigenvalue, symmetrize, GaussianDensity};

/// Closed-form posterior for `q = H p + ε`, `ε ~ N(0, Σ)`, `p ~ N(μ0, C0)`.
///
/// `C1 = (HᵀΣ⁻¹H + C0⁻¹)⁻¹` and `μ1 = C1 (HᵀΣ⁻¹ q_obs + C0⁻¹ μ0)`.
pub fn conjugate_update(h: &DMatrix<f64>, noise: &DiagonalNoise, q_obs: &DVector<f64>, prior: &GaussianDensity) -> Result<GaussianDensity> {
    ConjugateSolver::new(h, noise, prior)?.posterior(q_obs)
}

/// Factorized posterior precision, reusable across observation vectors that
/// share the operator, the noise and the prior.
pub struct ConjugateSolver {
    /// `HᵀΣ⁻¹`.
    ht_sinv: DMatrix<f64>,
    precision: Cholesky<f64, Dyn>,
    covariance: DMatrix<f64>,
    /// `C0⁻¹ μ0`.
    prior_term: DVector<f64>,
}

impl ConjugateSolver {
    pub fn new(h: &DMatrix<f64>, noise: &DiagonalNoise, prior: &GaussianDensity) -> Result<Self> {
        if h.ncols() != prior.dim() {
            return Err(Error::Dimension {
                context: "operator columns vs prior",
                expected: prior.dim(),
                got: h.ncols(),
            });
        }
        if h.nrows() != noise.len() {
            return Err(Error::Dimension {
                context: "operator rows vs noise",
                expected: noise.len(),
                got: h.nrows(),
            });
        }
        let w = noise.inverse_variances();
        let mut ht_sinv = h.transpose();
        for (mut col, wi) in ht_sinv.column_iter_mut().zip(w.iter()) {
            col *= *wi;
        }
        let p = symmetrize(&(&ht_sinv * h + prior.precision()));
        let precision = Cholesky::new(p.clone()).ok_or_else(|| Error::NotSpd {
            context: "posterior precision",
            min_eigenvalue: min_eigenvalue(&p),
        })?;
        let covariance = symmetrize(&precision.inverse());
        let prior_term = prior.solve(prior.mean());
        Ok(ConjugateSolver {
            ht_sinv,
            precision,
            covariance,
            prior_term,
        })
    }

    pub fn posterior_covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn posterior_mean(&self, q_obs: &DVector<f64>) -> Result<DVector<f64>> {
        if q_obs.len() != self.ht_sinv.ncols() {
            return Err(Error::Dimension {
                context: "observation",
                expected: self.ht_sinv.ncols(),
                got: q_obs.len(),
            });
        }
        let rhs = &self.ht_sinv * q_obs + &self.prior_term;
        Ok(self.precision.solve(&rhs))
    }

    pub fn posterior(&self, q_obs: &DVector<f64>) -> Result<GaussianDensity> {
        let mean = self.posterior_mean(q_obs)?;
        GaussianDensity::new(mean, self.covariance.clone())
    }
}
