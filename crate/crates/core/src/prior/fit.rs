use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gaussian::{jitter_for, GaussianDensity};
use super::helmholtz::HelmholtzRecord;
use crate::error::{Error, Result};
use crate::geometry::{ParameterLayout, N_BLOCKS};
use crate::stats::mean_and_covariance;

/// How block types are coupled in the prior covariance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceStructure {
    /// Independent block types, each with its own full per-component covariance.
    #[default]
    BlockDiagonal,
    /// One covariance over all block types, estimated with rings as samples.
    Pooled,
}

/// Per-type sample statistics collected while fitting.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeFit {
    pub block_i: usize,
    pub n_samples: usize,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub jitter: f64,
}

/// Fits `N(μ0, C0)` with the default block-diagonal structure.
pub fn fit_prior(records: &[HelmholtzRecord], layout: ParameterLayout) -> Result<GaussianDensity> {
    fit_prior_with(records, layout, CovarianceStructure::BlockDiagonal).map(|(g, _)| g)
}

/// Fits the prior and also returns the per-type statistics.
///
/// Each block type's magnetization sample (one entry per ring) gives a sample
/// mean and unbiased covariance; both are replicated over every ring of
/// `layout`. Only the first `n_components` components are used.
pub fn fit_prior_with(
    records: &[HelmholtzRecord],
    layout: ParameterLayout,
    structure: CovarianceStructure,
) -> Result<(GaussianDensity, Vec<TypeFit>)> {
    let nc = layout.n_components;
    let mut by_type: Vec<Vec<&HelmholtzRecord>> = vec![Vec::new(); N_BLOCKS];
    for r in records {
        if !(1..=N_BLOCKS).contains(&r.block_i) {
            return Err(Error::Prior(format!("record has block index {}", r.block_i)));
        }
        by_type[r.block_i - 1].push(r);
    }
    let mut fits = Vec::with_capacity(N_BLOCKS);
    for (i, recs) in by_type.iter_mut().enumerate() {
        if recs.is_empty() {
            return Err(Error::Prior(format!("no records for block type {}", i + 1)));
        }
        if recs.len() < 3 {
            return Err(Error::Prior(format!(
                "block type {} has {} records, at least 3 are required",
                i + 1,
                recs.len()
            )));
        }
        // Ring order makes the sums independent of input order.
        recs.sort_by_key(|r| r.ring_j);
        let samples: Vec<DVector<f64>> = recs
            .iter()
            .map(|r| DVector::from_iterator(nc, r.magnetization().iter().take(nc).copied()))
            .collect();
        let (mean, mut cov) = mean_and_covariance(&samples)?;
        let mut jitter = 0.0;
        if structure == CovarianceStructure::BlockDiagonal && Cholesky::new(cov.clone()).is_none() {
            jitter = jitter_for(&cov, &mean);
            cov += DMatrix::identity(nc, nc) * jitter;
            log::warn!("block type {}: covariance singular, added jitter {jitter:.3e}", i + 1);
        }
        fits.push(TypeFit {
            block_i: i + 1,
            n_samples: recs.len(),
            mean,
            covariance: cov,
            jitter,
        });
    }

    let per_ring = N_BLOCKS * nc;
    let mut ring_mean = DVector::zeros(per_ring);
    for f in &fits {
        ring_mean.rows_mut((f.block_i - 1) * nc, nc).copy_from(&f.mean);
    }
    let ring_cov = match structure {
        CovarianceStructure::BlockDiagonal => {
            let mut c = DMatrix::zeros(per_ring, per_ring);
            for f in &fits {
                let o = (f.block_i - 1) * nc;
                c.view_mut((o, o), (nc, nc)).copy_from(&f.covariance);
            }
            c
        }
        CovarianceStructure::Pooled => pooled_covariance(&by_type, nc, &ring_mean)?,
    };

    let dim = layout.dim();
    let mut mean = DVector::zeros(dim);
    let mut cov = DMatrix::zeros(dim, dim);
    for j in 0..layout.n_rings {
        let o = j * per_ring;
        mean.rows_mut(o, per_ring).copy_from(&ring_mean);
        cov.view_mut((o, o), (per_ring, per_ring)).copy_from(&ring_cov);
    }
    let density = match structure {
        CovarianceStructure::BlockDiagonal => GaussianDensity::new(mean, cov)?,
        CovarianceStructure::Pooled => GaussianDensity::with_jitter(mean, cov)?,
    };
    Ok((density, fits))
}

/// Covariance across all types, using rings present for every type as samples.
fn pooled_covariance(by_type: &[Vec<&HelmholtzRecord>], nc: usize, mean: &DVector<f64>) -> Result<DMatrix<f64>> {
    let rings: std::collections::BTreeSet<usize> = by_type[0].iter().map(|r| r.ring_j).collect();
    let common: Vec<usize> = rings
        .into_iter()
        .filter(|j| by_type.iter().all(|recs| recs.iter().any(|r| r.ring_j == *j)))
        .collect();
    if common.len() < 3 {
        return Err(Error::Prior("pooled covariance needs at least 3 complete rings".into()));
    }
    let per_ring = N_BLOCKS * nc;
    let mut c = DMatrix::zeros(per_ring, per_ring);
    for j in &common {
        let mut v = DVector::zeros(per_ring);
        for recs in by_type {
            let r = recs.iter().find(|r| r.ring_j == *j).expect("ring filtered as common");
            let m = r.magnetization();
            for k in 0..nc {
                v[(r.block_i - 1) * nc + k] = m[k];
            }
        }
        let d = v - mean;
        c.ger(1.0, &d, &d, 1.0);
    }
    Ok(c / (common.len() - 1) as f64)
}
