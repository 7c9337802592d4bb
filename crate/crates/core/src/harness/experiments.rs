use std::path::Path;

use nalgebra::{DVector, Matrix3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{reduction_metric, relative_error_profile, RelativeErrorProfile, SigmaProfile, E_REL_FLOOR};
use super::report::{Moments, ValidationReport};
use super::{add_noise_on, draw_ground_truth, stream_rng, Stream};
use crate::error::{Error, Result};
use crate::fem::{FemForward, Materials};
use crate::field::{assemble_linear_operator, LinearOperator};
use crate::geometry::{
    build_default_array, nominal_magnetization, nominal_parameter_vector, GeometryConfig, HalbachArray, ParameterLayout, N_BLOCKS,
};
use crate::inference::{run_parallel_chains, summarize_pooled, ConjugateSolver, DiagonalNoise, ForwardModel, PcnConfig, ProposalMode};
use crate::io::svg::{LinePlot, Series};
use crate::observables::{Component, ObservableSpec};
use crate::prior::{fit_prior, synth_helmholtz, GaussianDensity, HelmholtzRecord, TypeStatistics};

/// Block-to-block scatter used to synthesize Helmholtz-coil records.
///
/// Each block type's magnetization is Gaussian around its nominal value with
/// standard deviations relative to the nominal magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticPriorConfig {
    pub relative_std_transverse: f64,
    pub relative_std_axial: f64,
    /// Correlation between the x and y components.
    pub transverse_correlation: f64,
    /// Rings of synthetic records per block type.
    pub helmholtz_rings: usize,
    pub helmholtz_seed: u64,
}

impl Default for SyntheticPriorConfig {
    fn default() -> Self {
        SyntheticPriorConfig {
            relative_std_transverse: 0.006,
            relative_std_axial: 0.003,
            transverse_correlation: 0.3,
            helmholtz_rings: 12,
            helmholtz_seed: 1,
        }
    }
}

impl SyntheticPriorConfig {
    pub fn type_statistics(&self, array: &HalbachArray) -> Result<Vec<TypeStatistics>> {
        if !(self.transverse_correlation.abs() < 1.0) {
            return Err(Error::Config("transverse correlation must lie in (-1, 1)".into()));
        }
        if !(self.relative_std_transverse > 0.0 && self.relative_std_axial > 0.0) {
            return Err(Error::Config("relative standard deviations must be positive".into()));
        }
        (1..=N_BLOCKS)
            .map(|i| {
                let mean = nominal_magnetization(array, i)?;
                let st = self.relative_std_transverse * mean.norm();
                let sa = self.relative_std_axial * mean.norm();
                let c = self.transverse_correlation * st * st;
                Ok(TypeStatistics {
                    mean,
                    covariance: Matrix3::new(st * st, c, 0.0, c, st * st, 0.0, 0.0, 0.0, sa * sa),
                })
            })
            .collect()
    }
}

/// Synthesizes Helmholtz records from `config` and fits the prior for `layout`.
pub fn synthetic_prior(
    array: &HalbachArray,
    layout: ParameterLayout,
    config: &SyntheticPriorConfig,
) -> Result<(GaussianDensity, Vec<HelmholtzRecord>)> {
    let types = config.type_statistics(array)?;
    let records = synth_helmholtz(array, &types, config.helmholtz_rings, config.helmholtz_seed)?;
    Ok((fit_prior(&records, layout)?, records))
}

fn ring_centres(array: &HalbachArray) -> Result<Vec<f64>> {
    (1..=array.n_rings)
        .map(|j| array.ring_extent(j).map(|(a, b)| 0.5 * (a + b)))
        .collect()
}

/// `per_ring` equally spaced interior axial positions in every ring.
fn ring_sample_positions(array: &HalbachArray, per_ring: usize) -> Result<Vec<f64>> {
    let mut z = Vec::new();
    for j in 1..=array.n_rings {
        let (a, b) = array.ring_extent(j)?;
        for k in 0..per_ring {
            z.push(a + (b - a) * (k as f64 + 0.5) / per_ring as f64);
        }
    }
    Ok(z)
}

fn point_spec(radii: &[f64], n_per_circle: usize, zs: &[f64], components: Vec<Component>) -> Result<ObservableSpec> {
    let mut all = Vec::new();
    for &r in radii {
        if let ObservableSpec::PointField { points, .. } = ObservableSpec::circle_points(r, n_per_circle, zs, components.clone()) {
            all.extend(points);
        }
    }
    if all.is_empty() {
        return Err(Error::Config("no observation points configured".into()));
    }
    Ok(ObservableSpec::PointField { points: all, components })
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

// ---------------------------------------------------------------------------
// Linear validation
// ---------------------------------------------------------------------------

/// Linear-model validation on the 3D layout with flux-density and Fourier
/// observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearValidationConfig {
    /// Supplied by the surrounding run configuration, not this table.
    #[serde(skip)]
    pub geometry: GeometryConfig,
    #[serde(skip)]
    pub prior: SyntheticPriorConfig,
    /// Noise of flux-density observations (T).
    pub sigma_b: f64,
    /// Noise of Fourier-coefficient observations (T).
    pub sigma_f: f64,
    /// Radii of the flux-density sample circles (m).
    pub point_radii: Vec<f64>,
    pub points_per_circle: usize,
    /// Axial sample planes per ring for the flux-density points.
    pub planes_per_ring: usize,
    pub fourier_r0: f64,
    pub harmonics: usize,
    pub n_theta: usize,
    pub report_ring: usize,
}

impl Default for LinearValidationConfig {
    fn default() -> Self {
        LinearValidationConfig {
            geometry: GeometryConfig::default(),
            prior: SyntheticPriorConfig::default(),
            sigma_b: 1e-4,
            sigma_f: 1e-6,
            point_radii: vec![0.06, 0.09],
            points_per_circle: 32,
            planes_per_ring: 1,
            fourier_r0: 0.075,
            harmonics: 8,
            n_theta: 60,
            report_ring: 5,
        }
    }
}

/// Prepared linear validation: operators, prior and factorized posteriors.
/// Reusable across seeds.
pub struct LinearValidation {
    pub config: LinearValidationConfig,
    pub array: HalbachArray,
    pub layout: ParameterLayout,
    pub prior: GaussianDensity,
    pub nominal: DVector<f64>,
    pub spec_b: ObservableSpec,
    pub spec_f: ObservableSpec,
    pub op_b: LinearOperator,
    pub op_f: LinearOperator,
    prior_variances: DVector<f64>,
    solver_b: ConjugateSolver,
    solver_f: ConjugateSolver,
    noise_b: DiagonalNoise,
    noise_f: DiagonalNoise,
}

/// Both posteriors of one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearValidationOutcome {
    pub flux_density: ValidationReport,
    pub fourier: ValidationReport,
}

impl LinearValidation {
    pub fn new(config: LinearValidationConfig) -> Result<Self> {
        if !(config.sigma_b > 0.0 && config.sigma_f > 0.0) {
            return Err(Error::Config("observation noise levels must be positive".into()));
        }
        let array = build_default_array(&config.geometry)?;
        let layout = ParameterLayout::new(array.n_rings, 3)?;
        let (prior, _) = synthetic_prior(&array, layout, &config.prior)?;
        let nominal = nominal_parameter_vector(&array, layout)?.values;
        let zs = ring_sample_positions(&array, config.planes_per_ring.max(1))?;
        let spec_b = point_spec(
            &config.point_radii,
            config.points_per_circle,
            &zs,
            vec![Component::X, Component::Y, Component::Z],
        )?;
        let spec_f = ObservableSpec::fourier(config.fourier_r0, config.harmonics, config.n_theta, ring_centres(&array)?);
        let op_b = assemble_linear_operator(&array, &spec_b, layout)?;
        let op_f = assemble_linear_operator(&array, &spec_f, layout)?;
        let noise_b = DiagonalNoise::uniform(config.sigma_b, op_b.nrows())?;
        let noise_f = DiagonalNoise::uniform(config.sigma_f, op_f.nrows())?;
        let solver_b = ConjugateSolver::new(&op_b.matrix, &noise_b, &prior)?;
        let solver_f = ConjugateSolver::new(&op_f.matrix, &noise_f, &prior)?;
        Ok(LinearValidation {
            prior_variances: prior.variances(),
            config,
            array,
            layout,
            prior,
            nominal,
            spec_b,
            spec_f,
            op_b,
            op_f,
            solver_b,
            solver_f,
            noise_b,
            noise_f,
        })
    }

    pub fn run(&self, seed: u64) -> Result<LinearValidationOutcome> {
        let truth = draw_ground_truth(&self.prior, self.layout, seed)?;
        let cases = [
            ("flux density", &self.op_b, &self.noise_b, &self.solver_b, Stream::Noise),
            ("fourier", &self.op_f, &self.noise_f, &self.solver_f, Stream::NoiseFourier),
        ];
        let mut reports = Vec::with_capacity(2);
        for (label, op, noise, solver, stream) in cases {
            let clean = op.apply(&truth.values)?;
            let q_obs = add_noise_on(&clean, noise.sigma().as_slice(), seed, stream)?;
            let mean = solver.posterior_mean(&q_obs)?;
            let variances = solver.posterior_covariance().diagonal();
            reports.push(ValidationReport::build(
                label,
                seed,
                self.layout,
                &self.nominal,
                &truth.values,
                Moments {
                    mean: self.prior.mean(),
                    variances: &self.prior_variances,
                },
                Moments {
                    mean: &mean,
                    variances: &variances,
                },
                self.config.report_ring,
            )?);
        }
        let fourier = reports.pop().expect("two reports");
        let flux_density = reports.pop().expect("two reports");
        Ok(LinearValidationOutcome { flux_density, fourier })
    }
}

/// One seed of the linear validation, built from scratch.
pub fn run_linear_validation(config: &LinearValidationConfig, seed: u64) -> Result<LinearValidationOutcome> {
    LinearValidation::new(config.clone())?.run(seed)
}

// ---------------------------------------------------------------------------
// pCN validation
// ---------------------------------------------------------------------------

/// Forward model used inside the sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PcnForward {
    /// Closed-form 2D operator.
    Linear,
    /// Nonlinear finite elements with target edge length `h` (m).
    Fem { h: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcnValidationConfig {
    /// Supplied by the surrounding run configuration, not this table.
    #[serde(skip)]
    pub geometry: GeometryConfig,
    #[serde(skip)]
    pub prior: SyntheticPriorConfig,
    pub forward: PcnForward,
    pub sigma: f64,
    pub point_radii: Vec<f64>,
    pub points_per_circle: usize,
    pub n_steps: usize,
    pub step_size: f64,
    pub burn_in: f64,
    pub n_chains: usize,
    pub mode: ProposalMode,
}

impl Default for PcnValidationConfig {
    fn default() -> Self {
        PcnValidationConfig {
            geometry: GeometryConfig::default(),
            prior: SyntheticPriorConfig::default(),
            forward: PcnForward::Linear,
            sigma: 1e-4,
            point_radii: vec![0.09],
            points_per_circle: 32,
            n_steps: 5000,
            step_size: 1.0 / 80.0,
            burn_in: 0.1,
            n_chains: 1,
            mode: ProposalMode::PriorReversible,
        }
    }
}

/// Prepared cross-section sampling experiment.
pub struct PcnValidation {
    pub config: PcnValidationConfig,
    pub array: HalbachArray,
    pub layout: ParameterLayout,
    pub prior: GaussianDensity,
    pub nominal: DVector<f64>,
    pub spec: ObservableSpec,
    forward: Box<dyn ForwardModel + Send + Sync>,
    noise: DiagonalNoise,
}

impl PcnValidation {
    pub fn new(config: PcnValidationConfig) -> Result<Self> {
        if !(config.sigma > 0.0) {
            return Err(Error::Config("observation noise must be positive".into()));
        }
        if config.n_chains == 0 {
            return Err(Error::Config("at least one chain is required".into()));
        }
        let array = build_default_array(&config.geometry)?;
        let layout = ParameterLayout::cross_section();
        let (prior, _) = synthetic_prior(&array, layout, &config.prior)?;
        let nominal = nominal_parameter_vector(&array, layout)?.values;
        let spec = point_spec(&config.point_radii, config.points_per_circle, &[0.0], vec![Component::X, Component::Y])?;
        let forward: Box<dyn ForwardModel + Send + Sync> = match config.forward {
            PcnForward::Linear => Box::new(assemble_linear_operator(&array, &spec, layout)?),
            PcnForward::Fem { h } => {
                let materials = Materials {
                    magnet_mu_r: config.geometry.mu_r,
                    ..Materials::default()
                };
                Box::new(FemForward::with_default_mesh(&array, h, materials, spec.clone())?)
            }
        };
        let noise = DiagonalNoise::uniform(config.sigma, spec.len())?;
        Ok(PcnValidation {
            config,
            array,
            layout,
            prior,
            nominal,
            spec,
            forward,
            noise,
        })
    }

    pub fn forward(&self) -> &(dyn ForwardModel + Send + Sync) {
        self.forward.as_ref()
    }

    pub fn run(&self, seed: u64) -> Result<ValidationReport> {
        let truth = draw_ground_truth(&self.prior, self.layout, seed)?;
        let clean = self.forward.forward(&truth.values)?;
        let q_obs = add_noise_on(&clean, self.noise.sigma().as_slice(), seed, Stream::Noise)?;
        let mut rng = stream_rng(seed, Stream::Chains);
        let seeds: Vec<u64> = (0..self.config.n_chains).map(|_| rng.random()).collect();
        let pcn = PcnConfig {
            step_size: self.config.step_size,
            n_steps: self.config.n_steps,
            seed: 0,
            mode: self.config.mode,
        };
        let chains = run_parallel_chains(self.forward.as_ref(), &self.prior, &q_obs, &self.noise, &pcn, &seeds)?;
        let summary = summarize_pooled(&chains, self.config.burn_in)?;
        let label = match self.config.forward {
            PcnForward::Linear => "pCN, linear forward".to_string(),
            PcnForward::Fem { h } => format!("pCN, finite elements h = {h}"),
        };
        let mut report = ValidationReport::build(
            &label,
            seed,
            self.layout,
            &self.nominal,
            &truth.values,
            Moments {
                mean: self.prior.mean(),
                variances: &self.prior.variances(),
            },
            Moments {
                mean: &summary.mean,
                variances: &summary.variances(),
            },
            1,
        )?;
        report.acceptance_rate = Some(summary.acceptance_rate);
        report.min_ess = Some(summary.ess.min());
        Ok(report)
    }
}

/// One seed of the pCN validation, built from scratch.
pub fn run_pcn_validation(config: &PcnValidationConfig, seed: u64) -> Result<ValidationReport> {
    PcnValidation::new(config.clone())?.run(seed)
}

// ---------------------------------------------------------------------------
// Application-style run
// ---------------------------------------------------------------------------

/// Direction of the truth distribution's mean offset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftPattern {
    /// Every coordinate moves away from zero, so each block's magnetization
    /// grows: a coherent remanence bias of the prior.
    #[default]
    Outward,
    /// Independent random signs per coordinate.
    RandomSigns,
}

/// Prior-mismatch experiment: the truth is drawn around a shifted mean, the
/// magnet is observed through Fourier coefficients along the axis, and the
/// on-axis transverse field is compared before and after updating.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApplicationConfig {
    /// Supplied by the surrounding run configuration, not this table.
    #[serde(skip)]
    pub geometry: GeometryConfig,
    #[serde(skip)]
    pub prior: SyntheticPriorConfig,
    /// Offset of the truth distribution's mean, in prior standard deviations.
    pub shift_sd: f64,
    pub shift_pattern: ShiftPattern,
    pub n_z: usize,
    /// Distance beyond each magnet end covered by the scan (m).
    pub overhang_m: f64,
    pub fourier_r0: f64,
    pub harmonics: usize,
    pub n_theta: usize,
    pub sigma_homogeneous: f64,
    pub sigma_fringe: f64,
    /// Positions with `|z| > half_length − margin` count as fringe field.
    pub fringe_margin_m: f64,
}

impl Default for ApplicationConfig {
    fn default() -> Self {
        ApplicationConfig {
            geometry: GeometryConfig::default(),
            prior: SyntheticPriorConfig::default(),
            shift_sd: 1.0,
            shift_pattern: ShiftPattern::Outward,
            n_z: 40,
            overhang_m: 0.2,
            fourier_r0: 0.075,
            harmonics: 8,
            n_theta: 60,
            sigma_homogeneous: super::SIGMA_HOMOGENEOUS,
            sigma_fringe: super::SIGMA_FRINGE,
            fringe_margin_m: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApplicationReport {
    pub seed: u64,
    pub profile: SigmaProfile,
    /// Noisy on-axis `B_x` (T).
    pub measured_bx: Vec<f64>,
    pub prior_bx: Vec<f64>,
    pub posterior_bx: Vec<f64>,
    pub e_rel_prior: RelativeErrorProfile,
    pub e_rel_posterior: RelativeErrorProfile,
    /// Share of unmasked homogeneous positions where the relative error fell.
    pub improved_fraction_homogeneous: f64,
    /// Median of `E_rel(prior) / E_rel(posterior)` over unmasked homogeneous positions.
    pub median_reduction_factor: f64,
    /// Parameter-space reduction of the maximal deviation (percent).
    pub parameter_reduction_percent: f64,
}

impl ApplicationReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["z_m", "fringe", "sigma_T", "measured_bx_T", "prior_bx_T", "posterior_bx_T", "e_rel_prior", "e_rel_posterior"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for k in 0..self.profile.z_positions.len() {
            w.write_record([
                format!("{:.16e}", self.profile.z_positions[k]),
                self.profile.fringe[k].to_string(),
                format!("{:.16e}", self.profile.sigma[k]),
                format!("{:.16e}", self.measured_bx[k]),
                format!("{:.16e}", self.prior_bx[k]),
                format!("{:.16e}", self.posterior_bx[k]),
                opt(self.e_rel_prior.values[k]),
                opt(self.e_rel_posterior.values[k]),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Relative error against axial position on a log scale, fringe zones shaded.
    pub fn to_svg(&self) -> String {
        let z = &self.profile.z_positions;
        let series = |name: &str, color: &str, e: &RelativeErrorProfile| Series {
            name: name.into(),
            color: color.into(),
            points: z.iter().zip(&e.values).filter_map(|(z, v)| v.map(|v| (*z, v))).collect(),
            dashed: false,
        };
        let h = self.profile.half_length - self.profile.margin;
        let (zmin, zmax) = z.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        LinePlot {
            title: format!("on-axis Bx relative error (seed {})", self.seed),
            x_label: "z (m)".into(),
            y_label: "relative error".into(),
            series: vec![
                series("prior mean", "black", &self.e_rel_prior),
                series("posterior mean", "blue", &self.e_rel_posterior),
            ],
            bands: Vec::new(),
            shaded: vec![(zmin, -h), (h, zmax)],
            log_y: true,
        }
        .render()
    }
}

/// Prepared application run. Reusable across seeds.
pub struct Application {
    pub config: ApplicationConfig,
    pub array: HalbachArray,
    pub layout: ParameterLayout,
    pub prior: GaussianDensity,
    pub profile: SigmaProfile,
    pub spec: ObservableSpec,
    pub op_fourier: LinearOperator,
    pub op_axis: LinearOperator,
    solver: ConjugateSolver,
    noise: DiagonalNoise,
}

impl Application {
    pub fn new(config: ApplicationConfig) -> Result<Self> {
        if config.n_z < 2 {
            return Err(Error::Config("the axial scan needs at least two positions".into()));
        }
        if !(config.shift_sd.is_finite() && config.overhang_m >= 0.0) {
            return Err(Error::Config("shift and overhang must be finite and non-negative".into()));
        }
        let array = build_default_array(&config.geometry)?;
        let layout = ParameterLayout::new(array.n_rings, 3)?;
        let (prior, _) = synthetic_prior(&array, layout, &config.prior)?;
        let half = array.half_length();
        let span = half + config.overhang_m;
        let zs: Vec<f64> = (0..config.n_z)
            .map(|k| -span + 2.0 * span * k as f64 / (config.n_z - 1) as f64)
            .collect();
        let profile = SigmaProfile::with_levels(&zs, half, config.fringe_margin_m, config.sigma_homogeneous, config.sigma_fringe)?;
        let spec = ObservableSpec::fourier(config.fourier_r0, config.harmonics, config.n_theta, zs.clone());
        let op_fourier = assemble_linear_operator(&array, &spec, layout)?;
        let axis = ObservableSpec::PointField {
            points: zs.iter().map(|&z| crate::field::FieldPoint::air(0.0, 0.0, z)).collect(),
            components: vec![Component::X],
        };
        let op_axis = assemble_linear_operator(&array, &axis, layout)?;
        let noise = DiagonalNoise::new(DVector::from_vec(profile.row_sigmas(&spec)?))?;
        let solver = ConjugateSolver::new(&op_fourier.matrix, &noise, &prior)?;
        Ok(Application {
            config,
            array,
            layout,
            prior,
            profile,
            spec,
            op_fourier,
            op_axis,
            solver,
            noise,
        })
    }

    /// Truth drawn from the prior with its mean moved by `shift_sd` standard
    /// deviations in every coordinate, signed per [`ShiftPattern`].
    pub fn shifted_truth(&self, seed: u64) -> Result<DVector<f64>> {
        let base = draw_ground_truth(&self.prior, self.layout, seed)?.values;
        let mut rng = stream_rng(seed, Stream::Shift);
        let sd = self.prior.variances().map(f64::sqrt);
        let mu = self.prior.mean();
        Ok(DVector::from_fn(base.len(), |k, _| {
            let sign = match self.config.shift_pattern {
                ShiftPattern::Outward => if mu[k] < 0.0 { -1.0 } else { 1.0 },
                ShiftPattern::RandomSigns => if rng.random::<bool>() { 1.0 } else { -1.0 },
            };
            base[k] + sign * self.config.shift_sd * sd[k]
        }))
    }

    pub fn run(&self, seed: u64) -> Result<ApplicationReport> {
        let truth = self.shifted_truth(seed)?;
        let q_obs = add_noise_on(&self.op_fourier.apply(&truth)?, self.noise.sigma().as_slice(), seed, Stream::Noise)?;
        let mu_post = self.solver.posterior_mean(&q_obs)?;
        let measured = add_noise_on(&self.op_axis.apply(&truth)?, &self.profile.sigma, seed, Stream::NoiseAxis)?;
        let prior_bx = self.op_axis.apply(self.prior.mean())?;
        let posterior_bx = self.op_axis.apply(&mu_post)?;
        let e_prior = relative_error_profile(measured.as_slice(), prior_bx.as_slice(), E_REL_FLOOR)?;
        let e_post = relative_error_profile(measured.as_slice(), posterior_bx.as_slice(), E_REL_FLOOR)?;
        let pairs: Vec<(f64, f64)> = (0..self.profile.z_positions.len())
            .filter(|&k| !self.profile.fringe[k])
            .filter_map(|k| Some((e_prior.values[k]?, e_post.values[k]?)))
            .collect();
        if pairs.is_empty() {
            return Err(Error::Inference("no unmasked homogeneous positions in the axial scan".into()));
        }
        let improved = pairs.iter().filter(|(a, b)| b < a).count() as f64 / pairs.len() as f64;
        let factors: Vec<f64> = pairs.iter().map(|(a, b)| if *b > 0.0 { a / b } else { f64::INFINITY }).collect();
        Ok(ApplicationReport {
            seed,
            profile: self.profile.clone(),
            measured_bx: measured.iter().copied().collect(),
            prior_bx: prior_bx.iter().copied().collect(),
            posterior_bx: posterior_bx.iter().copied().collect(),
            e_rel_prior: e_prior,
            e_rel_posterior: e_post,
            improved_fraction_homogeneous: improved,
            median_reduction_factor: median(factors).expect("non-empty"),
            parameter_reduction_percent: reduction_metric(self.prior.mean(), &mu_post, &truth)?,
        })
    }
}

/// One seed of the application run, built from scratch.
pub fn run_application(config: &ApplicationConfig, seed: u64) -> Result<ApplicationReport> {
    Application::new(config.clone())?.run(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_geometry() -> GeometryConfig {
        GeometryConfig {
            n_rings: 12,
            ..GeometryConfig::default()
        }
    }

    #[test]
    fn synthetic_prior_is_centred_on_nominal() {
        let array = build_default_array(&small_geometry()).unwrap();
        let layout = ParameterLayout::cross_section();
        let cfg = SyntheticPriorConfig {
            helmholtz_rings: 200,
            ..SyntheticPriorConfig::default()
        };
        let (prior, records) = synthetic_prior(&array, layout, &cfg).unwrap();
        assert_eq!(records.len(), 200 * N_BLOCKS);
        let nominal = nominal_parameter_vector(&array, layout).unwrap().values;
        let m = nominal_magnetization(&array, 1).unwrap().norm();
        // Sample mean error ~ 0.006 m / sqrt(200) per coordinate.
        let dev = (prior.mean() - &nominal).amax();
        assert!(dev < 4.0 * 0.006 * m / 200f64.sqrt(), "mean deviation {dev}");
        let sd = prior.variances().map(f64::sqrt);
        for k in 0..sd.len() {
            assert!((sd[k] / (0.006 * m) - 1.0).abs() < 0.3, "sd[{k}] = {}", sd[k]);
        }
    }

    #[test]
    fn bad_prior_config_is_rejected() {
        let array = build_default_array(&small_geometry()).unwrap();
        let cfg = SyntheticPriorConfig {
            transverse_correlation: 1.0,
            ..SyntheticPriorConfig::default()
        };
        assert!(matches!(cfg.type_statistics(&array), Err(Error::Config(_))));
    }

    #[test]
    fn linear_validation_contracts_variance_and_is_deterministic() {
        let v = LinearValidation::new(LinearValidationConfig::default()).unwrap();
        assert_eq!(v.layout.dim(), 576);
        let a = v.run(3).unwrap();
        let b = v.run(3).unwrap();
        assert_eq!(a, b);
        assert!(a.flux_density.variance_contracted);
        assert!(a.fourier.variance_contracted);
        assert!(a.flux_density.reduction_percent <= 100.0);
    }

    #[test]
    fn pcn_validation_reports_chain_diagnostics() {
        let cfg = PcnValidationConfig {
            n_steps: 400,
            step_size: 0.05,
            ..PcnValidationConfig::default()
        };
        let v = PcnValidation::new(cfg).unwrap();
        let r = v.run(1).unwrap();
        let acc = r.acceptance_rate.unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert!(r.min_ess.unwrap() > 0.0);
        assert_eq!(r, v.run(1).unwrap());
    }

    #[test]
    fn application_shift_moves_the_truth() {
        let cfg = ApplicationConfig {
            n_z: 12,
            ..ApplicationConfig::default()
        };
        let app = Application::new(cfg).unwrap();
        let truth = app.shifted_truth(4).unwrap();
        let base = draw_ground_truth(&app.prior, app.layout, 4).unwrap().values;
        let sd = app.prior.variances().map(f64::sqrt);
        for k in 0..truth.len() {
            assert!(((truth[k] - base[k]).abs() / sd[k] - 1.0).abs() < 1e-9);
        }
        let r = app.run(4).unwrap();
        assert_eq!(r.measured_bx.len(), 12);
        assert!((0.0..=1.0).contains(&r.improved_fraction_homogeneous));
        assert!(r.profile.fringe.first() == Some(&true) && r.profile.fringe.last() == Some(&true));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(Vec::new()), None);
    }
}
