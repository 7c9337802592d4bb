//! Gaussian prior over block magnetizations built from Helmholtz-coil records.

mod fit;
mod gaussian;
mod helmholtz;
mod normality;

pub use fit::{fit_prior, fit_prior_with, CovarianceStructure, TypeFit};
pub use gaussian::GaussianDensity;
pub(crate) use gaussian::{min_eigenvalue, symmetrize};
pub use helmholtz::{load_helmholtz_csv, synth_helmholtz, write_helmholtz_csv, HelmholtzRecord, TypeStatistics, HELMHOLTZ_HEADER};
pub use normality::{anderson_darling, AndersonDarling, AD_CRITICAL_5PCT};
