use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{HbCurve, PicardOptions};
use crate::geometry::GeometryConfig;
use crate::harness::{ApplicationConfig, LinearValidationConfig, PcnValidationConfig, SyntheticPriorConfig};
use crate::inference::ProposalMode;
use crate::observables::{Component, FourierConvention};
use crate::prior::CovarianceStructure;

/// Parameter layout of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutKind {
    /// 16 blocks × (Mx, My), one ring.
    #[default]
    CrossSection,
    /// 16 blocks × all rings × (Mx, My, Mz).
    Full,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForwardKind {
    #[default]
    Analytic,
    /// Nonlinear 2D finite elements; cross-section layout only.
    Fem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub layout: LayoutKind,
    pub forward: ForwardKind,
    /// Target edge length of the finite-element mesh (m).
    pub mesh_h_m: f64,
    /// Truncation radius as a multiple of the outermost material radius.
    pub truncation_factor: f64,
    pub iron: HbCurve,
    /// Sampled `B_T,H_A_per_m` curve; overrides `iron` when set.
    pub iron_curve_csv: Option<PathBuf>,
    pub picard: PicardOptions,
    /// Directory for assembled analytic operators, keyed by configuration hash.
    pub operator_cache: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layout: LayoutKind::CrossSection,
            forward: ForwardKind::Analytic,
            mesh_h_m: 0.005,
            truncation_factor: 3.0,
            iron: HbCurve::default(),
            iron_curve_csv: None,
            picard: PicardOptions::default(),
            operator_cache: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    /// Helmholtz-coil records; synthetic records are generated when absent.
    pub helmholtz_csv: Option<PathBuf>,
    pub structure: CovarianceStructure,
    pub synthetic: SyntheticPriorConfig,
}

/// What is observed. Axial positions default to `z = 0` for the
/// cross-section layout and to every ring centre for the full layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObservablesConfig {
    Points {
        #[serde(default = "default_radii")]
        radii_m: Vec<f64>,
        #[serde(default = "default_points")]
        points_per_circle: usize,
        #[serde(default)]
        z_m: Option<Vec<f64>>,
        /// Defaults to the in-plane components for the cross-section layout
        /// and all three otherwise.
        #[serde(default)]
        components: Option<Vec<Component>>,
    },
    Fourier {
        #[serde(default = "default_r0")]
        r0_m: f64,
        #[serde(default = "default_harmonics")]
        harmonics: usize,
        #[serde(default = "default_n_theta")]
        n_theta: usize,
        #[serde(default)]
        z_m: Option<Vec<f64>>,
        #[serde(default)]
        convention: FourierConvention,
    },
}

fn default_radii() -> Vec<f64> {
    vec![0.09]
}
fn default_points() -> usize {
    32
}
fn default_r0() -> f64 {
    0.075
}
fn default_harmonics() -> usize {
    8
}
fn default_n_theta() -> usize {
    60
}

impl Default for ObservablesConfig {
    fn default() -> Self {
        ObservablesConfig::Points {
            radii_m: default_radii(),
            points_per_circle: default_points(),
            z_m: None,
            components: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub margin_m: f64,
    #[serde(rename = "sigma_homogeneous_T")]
    pub sigma_homogeneous_t: f64,
    #[serde(rename = "sigma_fringe_T")]
    pub sigma_fringe_t: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            margin_m: 0.1,
            sigma_homogeneous_t: crate::harness::SIGMA_HOMOGENEOUS,
            sigma_fringe_t: crate::harness::SIGMA_FRINGE,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Uniform noise level (T). Defaults to 1e-4 for point fields and 1e-6
    /// for Fourier coefficients.
    #[serde(rename = "sigma_T")]
    pub sigma_t: Option<f64>,
    /// Position-dependent levels; replaces `sigma_T` when present.
    pub profile: Option<ProfileConfig>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InferenceMode {
    #[default]
    Linear,
    Pcn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    pub mode: InferenceMode,
    pub step_size: f64,
    pub n_steps: usize,
    pub burn_in: f64,
    pub n_chains: usize,
    pub proposal: ProposalMode,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            mode: InferenceMode::Linear,
            step_size: 1.0 / 80.0,
            n_steps: 18_000,
            burn_in: 0.1,
            n_chains: 1,
            proposal: ProposalMode::PriorReversible,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSection {
    pub linear: LinearValidationConfig,
    pub pcn: PcnValidationConfig,
}

/// Complete description of a pipeline run. Every section is optional in the
/// TOML file; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub model: ModelConfig,
    pub prior: PriorConfig,
    pub observables: ObservablesConfig,
    pub noise: NoiseConfig,
    pub inference: InferenceConfig,
    pub validation: ValidationSection,
    pub evaluate: ApplicationConfig,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The resolved configuration, written next to every run's outputs.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Range checks that do not need the geometry to be built.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        positive("model.mesh_h_m", m.mesh_h_m)?;
        if !(m.truncation_factor > 1.0) {
            return Err(Error::Config(format!("model.truncation_factor must exceed 1, got {}", m.truncation_factor)));
        }
        if m.forward == ForwardKind::Fem && m.layout == LayoutKind::Full {
            return Err(Error::Config("the finite-element forward model supports only layout = \"cross-section\"".into()));
        }
        let inf = &self.inference;
        if !(inf.step_size > 0.0 && inf.step_size <= 1.0) {
            return Err(Error::Config(format!("inference.step_size must lie in (0, 1], got {}", inf.step_size)));
        }
        if inf.n_steps < 2 || inf.n_chains == 0 {
            return Err(Error::Config("inference needs n_steps >= 2 and n_chains >= 1".into()));
        }
        if !(0.0..1.0).contains(&inf.burn_in) {
            return Err(Error::Config(format!("inference.burn_in must lie in [0, 1), got {}", inf.burn_in)));
        }
        if let Some(s) = self.noise.sigma_t {
            positive("noise.sigma_T", s)?;
        }
        if let Some(p) = &self.noise.profile {
            positive("noise.profile.sigma_homogeneous_T", p.sigma_homogeneous_t)?;
            positive("noise.profile.sigma_fringe_T", p.sigma_fringe_t)?;
            if !(p.margin_m >= 0.0) {
                return Err(Error::Config("noise.profile.margin_m must be non-negative".into()));
            }
        }
        match &self.observables {
            ObservablesConfig::Points {
                radii_m,
                points_per_circle,
                components,
                ..
            } => {
                if radii_m.is_empty() || *points_per_circle == 0 {
                    return Err(Error::Config("observables need at least one radius and one point per circle".into()));
                }
                radii_m.iter().try_for_each(|r| positive("observables.radii_m", *r))?;
                if components.as_ref().is_some_and(|c| c.is_empty()) {
                    return Err(Error::Config("observables.components must not be empty".into()));
                }
            }
            ObservablesConfig::Fourier { r0_m, harmonics, n_theta, .. } => {
                positive("observables.r0_m", *r0_m)?;
                if *harmonics == 0 || *n_theta <= 2 * harmonics {
                    return Err(Error::Config(format!("observables need harmonics >= 1 and n_theta > 2K, got K = {harmonics}, n_theta = {n_theta}")));
                }
            }
        }
        Ok(())
    }
}
