use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative asymmetry tolerated in a covariance matrix.
const SYMMETRY_TOL: f64 = 1e-12;

/// Multivariate normal `N(mean, covariance)` with a cached Cholesky factor.
#[derive(Clone, Debug)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl PartialEq for GaussianDensity {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.covariance == other.covariance && self.jitter == other.jitter
    }
}

/// Smallest accepted squared Cholesky pivot, relative to the largest variance.
const PIVOT_FLOOR: f64 = 1e-12;

fn check_symmetric(c: &DMatrix<f64>) -> Result<()> {
    let scale = c.amax();
    for i in 0..c.nrows() {
        for j in 0..i {
            if (c[(i, j)] - c[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::Prior(format!("covariance is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Smallest eigenvalue, used for diagnostics when a factorization fails.
pub(crate) fn min_eigenvalue(c: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(c.clone()).eigenvalues.min()
}

/// Diagonal jitter that makes a PSD matrix factorizable.
pub(crate) fn jitter_for(c: &DMatrix<f64>, mean: &DVector<f64>) -> f64 {
    let n = c.nrows().max(1) as f64;
    let tr = c.trace();
    if tr > 0.0 {
        1e-10 * tr / n
    } else {
        1e-10 * (mean.norm_squared() / n).max(1.0)
    }
}

impl GaussianDensity {
    /// Requires a symmetric positive-definite covariance.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        Self::validate_shapes(&mean, &covariance)?;
        check_symmetric(&covariance)?;
        let sym = symmetrize(&covariance);
        let not_spd = || Error::NotSpd {
            context: "covariance",
            min_eigenvalue: min_eigenvalue(&sym),
        };
        let chol = Cholesky::new(sym.clone()).ok_or_else(not_spd)?;
        // A singular PSD matrix can factor with pivots at rounding level.
        let floor = PIVOT_FLOOR * sym.diagonal().max();
        if chol.l_dirty().diagonal().iter().any(|d| d * d <= floor) {
            return Err(not_spd());
        }
        Ok(GaussianDensity {
            mean,
            covariance: sym,
            chol,
            jitter: 0.0,
        })
    }

    /// Like [`Self::new`], but when the factorization fails a diagonal jitter of
    /// `1e-10 · trace / dim` is added once (or `1e-10 · max(‖μ‖²/dim, 1)` for a
    /// zero-trace matrix).
    pub fn with_jitter(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        match Self::new(mean.clone(), covariance.clone()) {
            Ok(g) => Ok(g),
            Err(Error::NotSpd { .. }) => {
                let eps = jitter_for(&covariance, &mean);
                let n = covariance.nrows();
                let jittered = symmetrize(&covariance) + DMatrix::identity(n, n) * eps;
                let mut g = Self::new(mean, jittered)?;
                g.jitter = eps;
                log::warn!("covariance not positive definite, added diagonal jitter {eps:.3e}");
                Ok(g)
            }
            Err(e) => Err(e),
        }
    }

    /// Rebuilds a stored density whose covariance already includes `jitter`.
    pub fn from_stored(mean: DVector<f64>, covariance: DMatrix<f64>, jitter: f64) -> Result<Self> {
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(Error::Prior(format!("stored jitter must be non-negative, got {jitter}")));
        }
        let mut g = Self::new(mean, covariance)?;
        g.jitter = jitter;
        Ok(g)
    }

    fn validate_shapes(mean: &DVector<f64>, covariance: &DMatrix<f64>) -> Result<()> {
        if covariance.nrows() != covariance.ncols() {
            return Err(Error::Prior("covariance must be square".into()));
        }
        if covariance.nrows() != mean.len() {
            return Err(Error::Dimension {
                context: "covariance order",
                expected: mean.len(),
                got: covariance.nrows(),
            });
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Prior("density has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// The covariance actually used, including any jitter.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = covariance`.
    pub fn cholesky_l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    /// Diagonal jitter added at construction (0 when none was needed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn variances(&self) -> DVector<f64> {
        self.covariance.diagonal()
    }

    /// `C⁻¹ b` through the cached factor.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `C⁻¹` formed from triangular solves against the factor.
    pub fn precision(&self) -> DMatrix<f64> {
        let p = self.chol.inverse();
        symmetrize(&p)
    }

    /// `-½ (x-μ)ᵀ C⁻¹ (x-μ)`, normalization constant dropped.
    pub fn log_density_unnormalized(&self, x: &DVector<f64>) -> f64 {
        let r = x - &self.mean;
        let mut w = r.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut w);
        -0.5 * w.norm_squared()
    }

    /// Draws `μ + S ξ`. `S` is the Cholesky factor, except for a jittered
    /// density where the PSD square root of the un-jittered covariance is used
    /// so that degenerate directions stay exactly at the mean.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let xi = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + self.sampling_factor() * xi
    }

    pub fn sampling_factor(&self) -> DMatrix<f64> {
        if self.jitter == 0.0 {
            return self.chol.l();
        }
        let n = self.dim();
        psd_sqrt(&(&self.covariance - DMatrix::identity(n, n) * self.jitter))
    }
}

pub(crate) fn symmetrize(c: &DMatrix<f64>) -> DMatrix<f64> {
    (c + c.transpose()) * 0.5
}

/// Symmetric square root `V diag(√max(λ,0)) Vᵀ` of a PSD matrix.
pub(crate) fn psd_sqrt(c: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(c));
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}
