use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ParameterLayout;
use crate::observables::ObservableSpec;

/// Observation noise inside the homogeneous field region (T).
pub const SIGMA_HOMOGENEOUS: f64 = 5e-5;
/// Observation noise in the fringe field (T).
pub const SIGMA_FRINGE: f64 = 5e-3;
/// Measured values below this magnitude (T) are excluded from relative errors.
pub const E_REL_FLOOR: f64 = 1e-6;

pub fn max_abs_deviation(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

fn check_dims(mu_prior: &DVector<f64>, mu_post: &DVector<f64>, p_true: &DVector<f64>) -> Result<()> {
    for (ctx, v) in [("posterior mean", mu_post), ("ground truth", p_true)] {
        if v.len() != mu_prior.len() {
            return Err(Error::Dimension {
                context: ctx,
                expected: mu_prior.len(),
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// `100 (1 − max|μ_post − p_true| / max|μ_prior − p_true|)` over the given
/// coordinates.
pub fn reduction_metric_on(
    mu_prior: &DVector<f64>,
    mu_post: &DVector<f64>,
    p_true: &DVector<f64>,
    indices: impl IntoIterator<Item = usize>,
) -> Result<f64> {
    check_dims(mu_prior, mu_post, p_true)?;
    let (mut prior_dev, mut post_dev) = (0.0f64, 0.0f64);
    let mut any = false;
    for k in indices {
        if k >= p_true.len() {
            return Err(Error::Dimension {
                context: "reduction index",
                expected: p_true.len(),
                got: k,
            });
        }
        any = true;
        prior_dev = prior_dev.max((mu_prior[k] - p_true[k]).abs());
        post_dev = post_dev.max((mu_post[k] - p_true[k]).abs());
    }
    if !any || prior_dev == 0.0 {
        return Err(Error::Inference("prior mean coincides with the ground truth; reduction is undefined".into()));
    }
    Ok(100.0 * (1.0 - post_dev / prior_dev))
}

/// Reduction of the maximal deviation over all coordinates.
pub fn reduction_metric(mu_prior: &DVector<f64>, mu_post: &DVector<f64>, p_true: &DVector<f64>) -> Result<f64> {
    reduction_metric_on(mu_prior, mu_post, p_true, 0..p_true.len())
}

/// Reduction restricted to the coordinates of 1-based ring `ring`.
pub fn ring_reduction(
    mu_prior: &DVector<f64>,
    mu_post: &DVector<f64>,
    p_true: &DVector<f64>,
    layout: ParameterLayout,
    ring: usize,
) -> Result<f64> {
    if !(1..=layout.n_rings).contains(&ring) {
        return Err(Error::Layout(format!("ring {ring} outside 1..={}", layout.n_rings)));
    }
    reduction_metric_on(mu_prior, mu_post, p_true, layout.ring_indices(ring - 1))
}

/// Position-dependent noise levels along the magnet axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaProfile {
    pub z_positions: Vec<f64>,
    pub sigma: Vec<f64>,
    pub fringe: Vec<bool>,
    pub sigma_homogeneous: f64,
    pub sigma_fringe: f64,
    pub half_length: f64,
    pub margin: f64,
}

/// Classifies `|z| > half_length − margin` as fringe field.
pub fn build_sigma_profile(z_positions: &[f64], half_length: f64, margin: f64) -> Result<SigmaProfile> {
    SigmaProfile::with_levels(z_positions, half_length, margin, SIGMA_HOMOGENEOUS, SIGMA_FRINGE)
}

impl SigmaProfile {
    pub fn with_levels(z_positions: &[f64], half_length: f64, margin: f64, sigma_homogeneous: f64, sigma_fringe: f64) -> Result<Self> {
        if !(margin >= 0.0) {
            return Err(Error::Config(format!("fringe margin must be non-negative, got {margin}")));
        }
        if !(sigma_homogeneous > 0.0 && sigma_fringe > 0.0) {
            return Err(Error::Config("noise levels must be positive".into()));
        }
        let fringe: Vec<bool> = z_positions.iter().map(|z| z.abs() > half_length - margin).collect();
        let sigma = fringe.iter().map(|&f| if f { sigma_fringe } else { sigma_homogeneous }).collect();
        Ok(SigmaProfile {
            z_positions: z_positions.to_vec(),
            sigma,
            fringe,
            sigma_homogeneous,
            sigma_fringe,
            half_length,
            margin,
        })
    }

    /// Noise level at one of the profile's positions.
    pub fn sigma_at(&self, z: f64) -> Option<f64> {
        self.z_positions
            .iter()
            .position(|&zp| (zp - z).abs() <= 1e-12 * zp.abs().max(1.0))
            .map(|k| self.sigma[k])
    }

    /// Per-row noise levels of `spec`, looked up by each row's axial position.
    pub fn row_sigmas(&self, spec: &ObservableSpec) -> Result<Vec<f64>> {
        spec.row_keys()
            .into_iter()
            .map(|(_, z, _)| {
                self.sigma_at(z)
                    .ok_or_else(|| Error::Observable(format!("z = {z} is not part of the noise profile")))
            })
            .collect()
    }
}

/// Pointwise `|(B_meas − B_sim) / B_meas|` with small measurements masked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrorProfile {
    /// `None` where `|B_meas|` is below the floor.
    pub values: Vec<Option<f64>>,
    pub masked: Vec<usize>,
}

pub fn relative_error_profile(measured: &[f64], simulated: &[f64], floor: f64) -> Result<RelativeErrorProfile> {
    if measured.len() != simulated.len() {
        return Err(Error::Dimension {
            context: "simulated profile",
            expected: measured.len(),
            got: simulated.len(),
        });
    }
    let mut masked = Vec::new();
    let values: Vec<Option<f64>> = measured
        .iter()
        .zip(simulated)
        .enumerate()
        .map(|(k, (m, s))| {
            if m.abs() < floor {
                masked.push(k);
                None
            } else {
                Some(((m - s) / m).abs())
            }
        })
        .collect();
    if masked.len() == values.len() {
        return Err(Error::Inference("every measured value is below the relative-error floor".into()));
    }
    if !masked.is_empty() {
        log::info!("{} positions masked in the relative error profile", masked.len());
    }
    Ok(RelativeErrorProfile { values, masked })
}
