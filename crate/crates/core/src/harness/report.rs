use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::metrics::{max_abs_deviation, reduction_metric, ring_reduction};
use crate::error::{Error, Result};
use crate::geometry::{ParameterLayout, N_BLOCKS};
use crate::io::svg::{Band, LinePlot, Series};

/// Per-coordinate comparison of truth, prior and posterior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub nominal: f64,
    pub truth: f64,
    pub prior_mean: f64,
    pub posterior_mean: f64,
    pub prior_variance: f64,
    pub posterior_variance: f64,
    pub prior_deviation: f64,
    pub posterior_deviation: f64,
}

/// Outcome of one synthetic-truth experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub label: String,
    pub seed: u64,
    pub prior_max_deviation: f64,
    pub posterior_max_deviation: f64,
    pub reduction_percent: f64,
    /// 1-based ring shown in plots and used for the per-ring reduction.
    pub report_ring: usize,
    pub ring_reduction_percent: Option<f64>,
    /// Posterior variance ≤ prior variance in every coordinate.
    pub variance_contracted: bool,
    pub acceptance_rate: Option<f64>,
    pub min_ess: Option<f64>,
    pub layout: ParameterLayout,
    pub rows: Vec<ReportRow>,
}

pub(crate) struct Moments<'a> {
    pub mean: &'a DVector<f64>,
    pub variances: &'a DVector<f64>,
}

impl ValidationReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn build(
        label: &str,
        seed: u64,
        layout: ParameterLayout,
        nominal: &DVector<f64>,
        truth: &DVector<f64>,
        prior: Moments<'_>,
        posterior: Moments<'_>,
        report_ring: usize,
    ) -> Result<Self> {
        let labels = layout.labels();
        let report_ring = report_ring.clamp(1, layout.n_rings);
        let rows = (0..layout.dim())
            .map(|k| ReportRow {
                label: labels[k].clone(),
                nominal: nominal[k],
                truth: truth[k],
                prior_mean: prior.mean[k],
                posterior_mean: posterior.mean[k],
                prior_variance: prior.variances[k],
                posterior_variance: posterior.variances[k],
                prior_deviation: (prior.mean[k] - truth[k]).abs(),
                posterior_deviation: (posterior.mean[k] - truth[k]).abs(),
            })
            .collect();
        // Allow for rounding in variances that are equal in exact arithmetic.
        let variance_contracted = prior
            .variances
            .iter()
            .zip(posterior.variances.iter())
            .all(|(a, b)| *b <= *a * (1.0 + 1e-9) + 1e-300);
        Ok(ValidationReport {
            label: label.to_string(),
            seed,
            prior_max_deviation: max_abs_deviation(prior.mean, truth),
            posterior_max_deviation: max_abs_deviation(posterior.mean, truth),
            reduction_percent: reduction_metric(prior.mean, posterior.mean, truth)?,
            report_ring,
            ring_reduction_percent: ring_reduction(prior.mean, posterior.mean, truth, layout, report_ring).ok(),
            variance_contracted,
            acceptance_rate: None,
            min_ess: None,
            layout,
            rows,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "label",
            "nominal",
            "truth",
            "prior_mean",
            "posterior_mean",
            "prior_variance",
            "posterior_variance",
            "prior_deviation",
            "posterior_deviation",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.label.clone(),
                format!("{:.16e}", r.nominal),
                format!("{:.16e}", r.truth),
                format!("{:.16e}", r.prior_mean),
                format!("{:.16e}", r.posterior_mean),
                format!("{:.16e}", r.prior_variance),
                format!("{:.16e}", r.posterior_variance),
                format!("{:.16e}", r.prior_deviation),
                format!("{:.16e}", r.posterior_deviation),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Deviation from nominal of the x components of the report ring, against
    /// block index, with one-standard-deviation bands.
    pub fn to_svg(&self) -> String {
        let ring = self.report_ring - 1;
        let idx: Vec<usize> = (0..N_BLOCKS).map(|b| self.layout.index(b, ring, 0)).collect();
        let x: Vec<f64> = (1..=N_BLOCKS).map(|b| b as f64).collect();
        let pick = |f: &dyn Fn(&ReportRow) -> f64| -> Vec<f64> { idx.iter().map(|&k| f(&self.rows[k])).collect() };
        let truth = pick(&|r| r.truth - r.nominal);
        let prior = pick(&|r| r.prior_mean - r.nominal);
        let post = pick(&|r| r.posterior_mean - r.nominal);
        let prior_sd = pick(&|r| r.prior_variance.max(0.0).sqrt());
        let post_sd = pick(&|r| r.posterior_variance.max(0.0).sqrt());
        let band = |m: &[f64], sd: &[f64], color: &str| Band {
            color: color.into(),
            x: x.clone(),
            lower: m.iter().zip(sd).map(|(a, b)| a - b).collect(),
            upper: m.iter().zip(sd).map(|(a, b)| a + b).collect(),
        };
        let series = |name: &str, color: &str, y: &[f64], dashed: bool| Series {
            name: name.into(),
            color: color.into(),
            points: x.iter().copied().zip(y.iter().copied()).collect(),
            dashed,
        };
        LinePlot {
            title: format!("{} (seed {}), ring {}", self.label, self.seed, self.report_ring),
            x_label: "block index".into(),
            y_label: "Mx deviation from nominal (A/m)".into(),
            series: vec![
                series("truth", "red", &truth, true),
                series("prior mean", "black", &prior, false),
                series("posterior mean", "blue", &post, false),
            ],
            bands: vec![band(&prior, &prior_sd, "black"), band(&post, &post_sd, "blue")],
            shaded: Vec::new(),
            log_y: false,
        }
        .render()
    }
}
