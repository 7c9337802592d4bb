//! The `halbach` command-line front end.
//!
//! Every subcommand reads an optional TOML [`RunConfig`], writes its outputs
//! under `--out` together with the resolved configuration and a checksummed
//! manifest, and maps failures to exit codes: 0 success, 1 domain error,
//! 2 configuration or usage error. Outputs of a failed run are removed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{generate_mesh, FemForward, HbCurve, Materials, SampledCurve};
use crate::field::{assemble_linear_operator, LinearOperator};
use crate::geometry::{build_default_array, nominal_parameter_vector, HalbachArray, ParameterLayout};
use crate::harness::report::Moments;
use crate::harness::{
    draw_ground_truth, make_observation, stream_rng, Application, ApplicationReport, LinearValidation, LinearValidationConfig,
    PcnValidation, PcnValidationConfig, SigmaProfile, Stream, ValidationReport,
};
use crate::inference::{conjugate_update, run_parallel_chains, summarize_pooled, DiagonalNoise, ForwardModel, PcnConfig};
use crate::io::{
    chain_artifacts, density_artifacts, load_density, load_observation, load_or_assemble_operator, load_parameters, observation_artifacts,
    parameter_artifact, Artifact, ForwardKind, InferenceMode, LayoutKind, ObservablesConfig, OutputDir, RunConfig,
};
use crate::observables::{Component, ObservableSpec, Observation};
use crate::prior::{anderson_darling, fit_prior_with, load_helmholtz_csv, synth_helmholtz, write_helmholtz_csv, GaussianDensity, HelmholtzRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

const CONFIG_SNAPSHOT: &str = "config.resolved.toml";

#[derive(Parser, Debug)]
#[command(name = "halbach", version, about = "Bayesian updating of Halbach-array magnet models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (TOML). Built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; receives the outputs, the resolved config and a manifest.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Export the block geometry and nominal magnetization.
    Geometry {
        #[command(flatten)]
        common: Common,
    },
    /// Generate synthetic Helmholtz-coil records.
    SynthHelmholtz {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        /// Rings of records per block type (default: prior.synthetic.helmholtz_rings).
        #[arg(long)]
        rings: Option<usize>,
    },
    /// Fit the Gaussian prior from Helmholtz-coil records.
    FitPrior {
        #[command(flatten)]
        common: Common,
        /// Records CSV (default: prior.helmholtz_csv, else synthetic records).
        #[arg(long)]
        helmholtz: Option<PathBuf>,
    },
    /// Evaluate the forward model for a parameter vector (nominal by default).
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Draw a ground truth from the prior and produce noisy observations.
    Observe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        /// Prior descriptor written by `fit-prior` (default: built from the config).
        #[arg(long)]
        prior: Option<PathBuf>,
    },
    /// Compute the posterior for an observation file.
    Infer {
        #[command(flatten)]
        common: Common,
        /// Observation CSV written by `observe`; its spec JSON must sit beside it.
        #[arg(long)]
        observation: PathBuf,
        #[arg(long)]
        prior: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<InferenceMode>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        step_size: Option<f64>,
        #[arg(long)]
        chains: Option<usize>,
        /// Required for `--mode pcn`.
        #[arg(long)]
        seed: Option<u64>,
        /// Ground-truth parameters; adds a deviation report when given.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Synthetic-truth validation over consecutive seeds.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: InferenceMode,
        /// First seed.
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        step_size: Option<f64>,
    },
    /// Application-style run with a shifted prior and position-dependent noise.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
    },
    /// Re-render tables and plots from report JSON files.
    Report {
        /// Directory searched recursively for report JSON files.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_DOMAIN,
    }
}

/// Caps the global worker pool at `HALBACH_THREADS` when set.
fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HALBACH_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("HALBACH_THREADS must be a positive integer, got {v:?}")))?;
    // A pool that already exists (repeated in-process runs) keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Opens the output directory and stores the configuration snapshot.
fn open_output(out: &Path, cfg: &RunConfig) -> Result<OutputDir> {
    let snapshot = cfg.to_toml()?;
    let mut dir = OutputDir::create(out)?;
    dir.write(CONFIG_SNAPSHOT, snapshot.as_bytes())?;
    Ok(dir)
}

/// Input files named on the command line must exist before any work starts.
fn require_file(path: Option<&Path>, flag: &str) -> Result<()> {
    match path {
        Some(p) if !p.is_file() => Err(config_error(format!("{flag} {}: no such file", p.display()))),
        _ => Ok(()),
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match &cmd {
        Command::FitPrior { helmholtz, .. } => require_file(helmholtz.as_deref(), "--helmholtz")?,
        Command::Simulate { params, .. } => require_file(params.as_deref(), "--params")?,
        Command::Observe { prior, .. } => require_file(prior.as_deref(), "--prior")?,
        Command::Infer {
            observation, prior, truth, ..
        } => {
            require_file(Some(observation), "--observation")?;
            require_file(prior.as_deref(), "--prior")?;
            require_file(truth.as_deref(), "--truth")?;
        }
        _ => {}
    }
    match cmd {
        Command::Geometry { common } => {
            let cfg = load_config(common.config.as_deref())?;
            cmd_geometry(&cfg, &common.out)
        }
        Command::SynthHelmholtz { common, seed, rings } => {
            let mut cfg = load_config(common.config.as_deref())?;
            cfg.prior.synthetic.helmholtz_seed = seed;
            if let Some(r) = rings {
                cfg.prior.synthetic.helmholtz_rings = r;
            }
            cmd_synth_helmholtz(&cfg, &common.out)
        }
        Command::FitPrior { common, helmholtz } => {
            let mut cfg = load_config(common.config.as_deref())?;
            if helmholtz.is_some() {
                cfg.prior.helmholtz_csv = helmholtz;
            }
            cmd_fit_prior(&cfg, &common.out)
        }
        Command::Simulate { common, params } => {
            let cfg = load_config(common.config.as_deref())?;
            cmd_simulate(&cfg, params.as_deref(), &common.out)
        }
        Command::Observe { common, seed, prior } => {
            let cfg = load_config(common.config.as_deref())?;
            cmd_observe(&cfg, seed, prior.as_deref(), &common.out)
        }
        Command::Infer {
            common,
            observation,
            prior,
            mode,
            steps,
            step_size,
            chains,
            seed,
            truth,
        } => {
            let mut cfg = load_config(common.config.as_deref())?;
            if let Some(m) = mode {
                cfg.inference.mode = m;
            }
            if let Some(n) = steps {
                cfg.inference.n_steps = n;
            }
            if let Some(s) = step_size {
                cfg.inference.step_size = s;
            }
            if let Some(c) = chains {
                cfg.inference.n_chains = c;
            }
            cfg.validate()?;
            if cfg.inference.mode == InferenceMode::Pcn && seed.is_none() {
                return Err(config_error("--seed is required for --mode pcn"));
            }
            cmd_infer(&cfg, &observation, prior.as_deref(), seed, truth.as_deref(), &common.out)
        }
        Command::Validate {
            common,
            mode,
            seed,
            seeds,
            steps,
            step_size,
        } => {
            let mut cfg = load_config(common.config.as_deref())?;
            if seeds == 0 {
                return Err(config_error("--seeds must be at least 1"));
            }
            if let Some(n) = steps {
                cfg.validation.pcn.n_steps = n;
            }
            if let Some(s) = step_size {
                cfg.validation.pcn.step_size = s;
            }
            cmd_validate(&cfg, mode, seed, seeds, &common.out)
        }
        Command::Evaluate { common, seed } => {
            let cfg = load_config(common.config.as_deref())?;
            cmd_evaluate(&cfg, seed, &common.out)
        }
        Command::Report { input, out } => cmd_report(&input, &out),
    }
}

// ---------------------------------------------------------------------------
// Building blocks shared by the subcommands
// ---------------------------------------------------------------------------

fn layout_for(cfg: &RunConfig, array: &HalbachArray) -> Result<ParameterLayout> {
    match cfg.model.layout {
        LayoutKind::CrossSection => Ok(ParameterLayout::cross_section()),
        LayoutKind::Full => ParameterLayout::new(array.n_rings, 3),
    }
}

fn ring_centres(array: &HalbachArray) -> Result<Vec<f64>> {
    (1..=array.n_rings)
        .map(|j| array.ring_extent(j).map(|(a, b)| 0.5 * (a + b)))
        .collect()
}

fn observable_spec(cfg: &RunConfig, array: &HalbachArray, layout: ParameterLayout) -> Result<ObservableSpec> {
    let default_z = || -> Result<Vec<f64>> {
        if layout.is_2d() {
            Ok(vec![0.0])
        } else {
            ring_centres(array)
        }
    };
    let spec = match &cfg.observables {
        ObservablesConfig::Points {
            radii_m,
            points_per_circle,
            z_m,
            components,
        } => {
            let zs = match z_m {
                Some(z) => z.clone(),
                None => default_z()?,
            };
            let comps = components.clone().unwrap_or_else(|| {
                if layout.is_2d() {
                    vec![Component::X, Component::Y]
                } else {
                    vec![Component::X, Component::Y, Component::Z]
                }
            });
            let mut points = Vec::new();
            for &r in radii_m {
                if let ObservableSpec::PointField { points: p, .. } = ObservableSpec::circle_points(r, *points_per_circle, &zs, comps.clone()) {
                    points.extend(p);
                }
            }
            ObservableSpec::PointField { points, components: comps }
        }
        ObservablesConfig::Fourier {
            r0_m,
            harmonics,
            n_theta,
            z_m,
            convention,
        } => ObservableSpec::FourierCircle {
            r0: *r0_m,
            harmonics: *harmonics,
            n_theta: *n_theta,
            z_positions: match z_m {
                Some(z) => z.clone(),
                None => default_z()?,
            },
            convention: *convention,
        },
    };
    spec.validate(Some(array)).map_err(|e| config_error(format!("observables: {e}")))?;
    Ok(spec)
}

/// Per-row noise levels for `spec` from the noise section.
fn noise_levels(cfg: &RunConfig, array: &HalbachArray, spec: &ObservableSpec) -> Result<Vec<f64>> {
    if let Some(p) = &cfg.noise.profile {
        let mut zs: Vec<f64> = spec.row_keys().into_iter().map(|(_, z, _)| z).collect();
        zs.sort_by(f64::total_cmp);
        zs.dedup();
        let profile = SigmaProfile::with_levels(&zs, array.half_length(), p.margin_m, p.sigma_homogeneous_t, p.sigma_fringe_t)?;
        return profile.row_sigmas(spec);
    }
    let sigma = cfg.noise.sigma_t.unwrap_or(match spec {
        ObservableSpec::PointField { .. } => 1e-4,
        ObservableSpec::FourierCircle { .. } => 1e-6,
    });
    Ok(vec![sigma; spec.len()])
}

fn helmholtz_records(cfg: &RunConfig, array: &HalbachArray) -> Result<Vec<HelmholtzRecord>> {
    match &cfg.prior.helmholtz_csv {
        Some(p) => load_helmholtz_csv(p),
        None => {
            let s = &cfg.prior.synthetic;
            synth_helmholtz(array, &s.type_statistics(array)?, s.helmholtz_rings, s.helmholtz_seed)
        }
    }
}

fn prior_for(cfg: &RunConfig, array: &HalbachArray, layout: ParameterLayout, stored: Option<&Path>) -> Result<GaussianDensity> {
    match stored {
        Some(path) => {
            let s = load_density(path)?;
            if let Some(l) = s.layout {
                if l != layout {
                    return Err(config_error(format!(
                        "prior {} has a {}-ring, {}-component layout; the configuration asks for {} rings, {} components",
                        path.display(),
                        l.n_rings,
                        l.n_components,
                        layout.n_rings,
                        layout.n_components
                    )));
                }
            }
            if s.density.dim() != layout.dim() {
                return Err(Error::Dimension {
                    context: "stored prior",
                    expected: layout.dim(),
                    got: s.density.dim(),
                });
            }
            Ok(s.density)
        }
        None => Ok(fit_prior_with(&helmholtz_records(cfg, array)?, layout, cfg.prior.structure)?.0),
    }
}

fn analytic_operator(cfg: &RunConfig, array: &HalbachArray, spec: &ObservableSpec, layout: ParameterLayout) -> Result<LinearOperator> {
    let t = Instant::now();
    let op = match &cfg.model.operator_cache {
        Some(dir) => load_or_assemble_operator(dir, array, spec, layout)?,
        None => assemble_linear_operator(array, spec, layout)?,
    };
    log::info!("operator {}x{} ready in {:.3} s", op.nrows(), op.ncols(), t.elapsed().as_secs_f64());
    Ok(op)
}

fn materials(cfg: &RunConfig) -> Result<Materials> {
    let iron = match &cfg.model.iron_curve_csv {
        Some(p) => HbCurve::Sampled(SampledCurve::from_csv(p)?),
        None => cfg.model.iron.clone(),
    };
    let m = Materials {
        magnet_mu_r: cfg.geometry.mu_r,
        iron,
    };
    m.validate()?;
    Ok(m)
}

fn forward_model(
    cfg: &RunConfig,
    array: &HalbachArray,
    spec: &ObservableSpec,
    layout: ParameterLayout,
) -> Result<Box<dyn ForwardModel + Send + Sync>> {
    match cfg.model.forward {
        ForwardKind::Analytic => Ok(Box::new(analytic_operator(cfg, array, spec, layout)?)),
        ForwardKind::Fem => {
            let t = Instant::now();
            let mesh = generate_mesh(array, cfg.model.mesh_h_m, cfg.model.truncation_factor * array.material_radius())?;
            let n = mesh.n_triangles();
            let f = FemForward::new(array, mesh, materials(cfg)?, spec.clone(), cfg.model.picard)?;
            log::info!("finite-element model with {n} triangles ready in {:.3} s", t.elapsed().as_secs_f64());
            Ok(Box::new(f))
        }
    }
}

fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect::<String>()
        .split('_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

fn write_validation_report(out: &mut OutputDir, dir: &str, r: &ValidationReport) -> Result<()> {
    let stem = format!("{dir}/{}", slug(&r.label));
    out.write_json(&format!("{stem}.json"), r)?;
    out.write_with(&format!("{stem}.csv"), |p| {
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        r.write_csv(p)
    })?;
    out.write(&format!("{stem}.svg"), r.to_svg().as_bytes())?;
    Ok(())
}

fn write_application_report(out: &mut OutputDir, stem: &str, r: &ApplicationReport) -> Result<()> {
    out.write_json(&format!("{stem}.json"), r)?;
    out.write_with(&format!("{stem}.csv"), |p| {
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        r.write_csv(p)
    })?;
    out.write(&format!("{stem}.svg"), r.to_svg().as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_geometry(cfg: &RunConfig, out: &Path) -> Result<()> {
    let array = build_default_array(&cfg.geometry)?;
    let layout = layout_for(cfg, &array)?;
    let nominal = nominal_parameter_vector(&array, layout)?;
    let mut dir = open_output(out, cfg)?;
    dir.write_json("geometry.json", &array)?;
    dir.write_artifact(&parameter_artifact("nominal.json", &nominal)?)?;
    dir.commit()?;
    Ok(())
}

fn cmd_synth_helmholtz(cfg: &RunConfig, out: &Path) -> Result<()> {
    let array = build_default_array(&cfg.geometry)?;
    let records = helmholtz_records(
        &RunConfig {
            prior: crate::io::PriorConfig {
                helmholtz_csv: None,
                ..cfg.prior.clone()
            },
            ..cfg.clone()
        },
        &array,
    )?;
    let mut dir = open_output(out, cfg)?;
    dir.write_with("helmholtz.csv", |p| write_helmholtz_csv(p, &records))?;
    dir.commit()?;
    Ok(())
}

#[derive(Serialize)]
struct NormalityRow {
    block_i: usize,
    component: &'static str,
    n_samples: usize,
    a2_adjusted: f64,
    reject_at_5pct: bool,
}

fn cmd_fit_prior(cfg: &RunConfig, out: &Path) -> Result<()> {
    let array = build_default_array(&cfg.geometry)?;
    let layout = layout_for(cfg, &array)?;
    let records = helmholtz_records(cfg, &array)?;
    let (prior, fits) = fit_prior_with(&records, layout, cfg.prior.structure)?;
    let mut normality = Vec::new();
    for i in 1..=crate::geometry::N_BLOCKS {
        let recs: Vec<&HelmholtzRecord> = records.iter().filter(|r| r.block_i == i).collect();
        for (c, name) in ["Mx", "My", "Mz"].iter().enumerate().take(layout.n_components) {
            let x: Vec<f64> = recs.iter().map(|r| r.magnetization()[c]).collect();
            match anderson_darling(&x) {
                Ok(ad) => normality.push(NormalityRow {
                    block_i: i,
                    component: name,
                    n_samples: x.len(),
                    a2_adjusted: ad.a2_adjusted,
                    reject_at_5pct: ad.reject_at_5pct,
                }),
                Err(e) => log::warn!("normality test skipped for block {i} {name}: {e}"),
            }
        }
    }
    let jitters: Vec<(usize, f64)> = fits.iter().filter(|f| f.jitter > 0.0).map(|f| (f.block_i, f.jitter)).collect();
    let mut dir = open_output(out, cfg)?;
    dir.write_all(&density_artifacts("prior", &prior, Some(layout))?)?;
    dir.write_json("normality.json", &normality)?;
    dir.write_json("jitter.json", &jitters)?;
    dir.commit()?;
    Ok(())
}

fn simulated_csv(spec: &ObservableSpec, values: &DVector<f64>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "z_m", "index", "value_T"])?;
    for (k, (kind, z, index)) in spec.row_keys().into_iter().enumerate() {
        w.write_record([kind, format!("{z:.16e}"), index.to_string(), format!("{:.16e}", values[k])])?;
    }
    w.into_inner().map_err(|e| Error::Io {
        path: PathBuf::from("simulated.csv"),
        source: e.into_error(),
    })
}

fn cmd_simulate(cfg: &RunConfig, params: Option<&Path>, out: &Path) -> Result<()> {
    let array = build_default_array(&cfg.geometry)?;
    let layout = layout_for(cfg, &array)?;
    let p = match params {
        Some(path) => {
            let p = load_parameters(path)?;
            if p.layout != layout {
                return Err(config_error(format!("parameters in {} do not match the configured layout", path.display())));
            }
            p
        }
        None => nominal_parameter_vector(&array, layout)?,
    };
    let spec = observable_spec(cfg, &array, layout)?;
    let forward = forward_model(cfg, &array, &spec, layout)?;
    let t = Instant::now();
    let q = forward.forward(&p.values)?;
    log::info!("forward evaluation in {:.3} s", t.elapsed().as_secs_f64());
    let mut dir = open_output(out, cfg)?;
    dir.write("simulated.csv", &simulated_csv(&spec, &q)?)?;
    dir.write_json("simulated.spec.json", &spec)?;
    dir.write_artifact(&parameter_artifact("parameters.json", &p)?)?;
    dir.commit()?;
    Ok(())
}

fn cmd_observe(cfg: &RunConfig, seed: u64, prior_path: Option<&Path>, out: &Path) -> Result<()> {
    let array = build_default_array(&cfg.geometry)?;
    let layout = layout_for(cfg, &array)?;
    let prior = prior_for(cfg, &array, layout, prior_path)?;
    let spec = observable_spec(cfg, &array, layout)?;
    let sigma = noise_levels(cfg, &array, &spec)?;
    let forward = forward_model(cfg, &array, &spec, layout)?;
    let truth = draw_ground_truth(&prior, layout, seed)?;
    let obs = make_observation(forward.as_ref(), &spec, &truth, &sigma, seed)?;
    let mut dir = open_output(out, cfg)?;
    dir.write_all(&observation_artifacts("observation", &obs)?)?;
    dir.write_artifact(&parameter_artifact("truth.json", &truth)?)?;
    dir.commit()?;
    Ok(())
}

#[derive(Serialize)]
struct ChainSummary {
    n_chains: usize,
    n_steps: usize,
    step_size: f64,
    burn_in: usize,
    n_retained: usize,
    acceptance_rate: f64,
    min_ess: f64,
    frozen_coordinates: Vec<usize>,
    chain_seeds: Vec<u64>,
}

fn cmd_infer(cfg: &RunConfig, obs_path: &Path, prior_path: Option<&Path>, seed: Option<u64>, truth: Option<&Path>, out: &Path) -> Result<()> {
    let array = build_default_array(&cfg.geometry)?;
    let layout = layout_for(cfg, &array)?;
    let prior = prior_for(cfg, &array, layout, prior_path)?;
    let obs: Observation = load_observation(obs_path)?;
    obs.spec.validate(Some(&array))?;
    let noise = DiagonalNoise::from_observation(&obs)?;
    let q_obs = obs.values_vector();
    let labels = layout.labels();
    let mut artifacts: Vec<Artifact> = Vec::new();
    let (posterior, chain_info) = match cfg.inference.mode {
        InferenceMode::Linear => {
            if cfg.model.forward != ForwardKind::Analytic {
                return Err(config_error("linear inference needs model.forward = \"analytic\""));
            }
            let op = analytic_operator(cfg, &array, &obs.spec, layout)?;
            let t = Instant::now();
            let post = conjugate_update(&op.matrix, &noise, &q_obs, &prior)?;
            log::info!("conjugate update in {:.3} s", t.elapsed().as_secs_f64());
            (post, None)
        }
        InferenceMode::Pcn => {
            let seed = seed.ok_or_else(|| config_error("--seed is required for --mode pcn"))?;
            let forward = forward_model(cfg, &array, &obs.spec, layout)?;
            let inf = &cfg.inference;
            let mut rng = stream_rng(seed, Stream::Chains);
            let seeds: Vec<u64> = (0..inf.n_chains).map(|_| rng.random()).collect();
            let pcn = PcnConfig {
                step_size: inf.step_size,
                n_steps: inf.n_steps,
                seed: 0,
                mode: inf.proposal,
            };
            let t = Instant::now();
            let chains = run_parallel_chains(forward.as_ref(), &prior, &q_obs, &noise, &pcn, &seeds)?;
            let secs = t.elapsed().as_secs_f64();
            log::info!(
                "{} chain(s) of {} steps in {secs:.3} s ({:.1} steps/s)",
                chains.len(),
                inf.n_steps,
                (chains.len() * inf.n_steps) as f64 / secs.max(1e-9)
            );
            let summary = summarize_pooled(&chains, inf.burn_in)?;
            for (k, c) in chains.iter().enumerate() {
                artifacts.extend(chain_artifacts(&format!("chain_{k}"), c, &labels)?);
            }
            let info = ChainSummary {
                n_chains: chains.len(),
                n_steps: inf.n_steps,
                step_size: inf.step_size,
                burn_in: summary.burn_in,
                n_retained: summary.n_retained,
                acceptance_rate: summary.acceptance_rate,
                min_ess: summary.ess.min(),
                frozen_coordinates: summary.frozen.clone(),
                chain_seeds: seeds,
            };
            (GaussianDensity::with_jitter(summary.mean.clone(), summary.covariance.clone())?, Some(info))
        }
    };
    let report = match truth {
        Some(path) => {
            let p_true = load_parameters(path)?;
            if p_true.layout != layout {
                return Err(config_error("truth parameters do not match the configured layout"));
            }
            let nominal = nominal_parameter_vector(&array, layout)?.values;
            let (prior_var, post_var) = (prior.variances(), posterior.variances());
            let mut r = ValidationReport::build(
                match cfg.inference.mode {
                    InferenceMode::Linear => "posterior, conjugate",
                    InferenceMode::Pcn => "posterior, pCN",
                },
                seed.unwrap_or(0),
                layout,
                &nominal,
                &p_true.values,
                Moments {
                    mean: prior.mean(),
                    variances: &prior_var,
                },
                Moments {
                    mean: posterior.mean(),
                    variances: &post_var,
                },
                5,
            )?;
            if let Some(info) = &chain_info {
                r.acceptance_rate = Some(info.acceptance_rate);
                r.min_ess = Some(info.min_ess);
            }
            Some(r)
        }
        None => None,
    };
    let mut dir = open_output(out, cfg)?;
    dir.write_all(&density_artifacts("posterior", &posterior, Some(layout))?)?;
    dir.write_all(&artifacts)?;
    if let Some(info) = &chain_info {
        dir.write_json("chain_summary.json", info)?;
    }
    if let Some(r) = &report {
        write_validation_report(&mut dir, "report", r)?;
    }
    dir.commit()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SummaryEntry {
    label: String,
    seed: u64,
    reduction_percent: f64,
    ring_reduction_percent: Option<f64>,
    variance_contracted: bool,
    acceptance_rate: Option<f64>,
    min_ess: Option<f64>,
}

impl From<&ValidationReport> for SummaryEntry {
    fn from(r: &ValidationReport) -> Self {
        SummaryEntry {
            label: r.label.clone(),
            seed: r.seed,
            reduction_percent: r.reduction_percent,
            ring_reduction_percent: r.ring_reduction_percent,
            variance_contracted: r.variance_contracted,
            acceptance_rate: r.acceptance_rate,
            min_ess: r.min_ess,
        }
    }
}

#[derive(Serialize)]
struct ValidationSummary {
    mode: InferenceMode,
    seeds: Vec<u64>,
    median_reduction_percent: BTreeMap<String, f64>,
    all_variances_contracted: bool,
    entries: Vec<SummaryEntry>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn summary_csv(entries: &[SummaryEntry]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    w.write_record(["label", "seed", "reduction_percent", "ring_reduction_percent", "variance_contracted", "acceptance_rate", "min_ess"])?;
    for e in entries {
        w.write_record([
            e.label.clone(),
            e.seed.to_string(),
            format!("{:.16e}", e.reduction_percent),
            opt(e.ring_reduction_percent),
            e.variance_contracted.to_string(),
            opt(e.acceptance_rate),
            opt(e.min_ess),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io {
        path: PathBuf::from("summary.csv"),
        source: e.into_error(),
    })
}

fn cmd_validate(cfg: &RunConfig, mode: InferenceMode, first: u64, n: usize, out: &Path) -> Result<()> {
    let seeds: Vec<u64> = (0..n as u64).map(|k| first.wrapping_add(k)).collect();
    let t = Instant::now();
    let reports: Vec<Vec<ValidationReport>> = match mode {
        InferenceMode::Linear => {
            let v = LinearValidation::new(LinearValidationConfig {
                geometry: cfg.geometry.clone(),
                prior: cfg.prior.synthetic.clone(),
                ..cfg.validation.linear.clone()
            })?;
            seeds
                .par_iter()
                .map(|&s| v.run(s).map(|o| vec![o.flux_density, o.fourier]))
                .collect::<Result<_>>()?
        }
        InferenceMode::Pcn => {
            let v = PcnValidation::new(PcnValidationConfig {
                geometry: cfg.geometry.clone(),
                prior: cfg.prior.synthetic.clone(),
                ..cfg.validation.pcn.clone()
            })?;
            seeds.par_iter().map(|&s| v.run(s).map(|r| vec![r])).collect::<Result<_>>()?
        }
    };
    log::info!("{} seed(s) validated in {:.3} s", seeds.len(), t.elapsed().as_secs_f64());
    let flat: Vec<&ValidationReport> = reports.iter().flatten().collect();
    let mut by_label: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &flat {
        by_label.entry(r.label.clone()).or_default().push(r.reduction_percent);
    }
    let summary = ValidationSummary {
        mode,
        seeds: seeds.clone(),
        median_reduction_percent: by_label.into_iter().map(|(k, v)| (k, median(v))).collect(),
        all_variances_contracted: flat.iter().all(|r| r.variance_contracted),
        entries: flat.iter().map(|r| SummaryEntry::from(*r)).collect(),
    };
    let mut dir = open_output(out, cfg)?;
    for (seed, rs) in seeds.iter().zip(&reports) {
        for r in rs {
            write_validation_report(&mut dir, &format!("seed_{seed}"), r)?;
        }
    }
    dir.write_json("summary.json", &summary)?;
    dir.write("summary.csv", &summary_csv(&summary.entries)?)?;
    dir.commit()?;
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig, seed: u64, out: &Path) -> Result<()> {
    let app = Application::new(crate::harness::ApplicationConfig {
        geometry: cfg.geometry.clone(),
        prior: cfg.prior.synthetic.clone(),
        ..cfg.evaluate.clone()
    })?;
    let t = Instant::now();
    let r = app.run(seed)?;
    log::info!("application run in {:.3} s", t.elapsed().as_secs_f64());
    let mut dir = open_output(out, cfg)?;
    write_application_report(&mut dir, "application", &r)?;
    dir.commit()?;
    Ok(())
}

fn collect_json(dir: &Path, acc: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_json(&p, acc)?;
        } else if p.extension().is_some_and(|e| e == "json") {
            acc.push(p);
        }
    }
    Ok(())
}

fn cmd_report(input: &Path, out: &Path) -> Result<()> {
    if !input.is_dir() {
        return Err(config_error(format!("--input {} is not a directory", input.display())));
    }
    let mut files = Vec::new();
    collect_json(input, &mut files)?;
    let mut validation = Vec::new();
    let mut application = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?;
        let rel = f.strip_prefix(input).unwrap_or(&f).with_extension("");
        let rel = rel.to_string_lossy().replace('\\', "/");
        if let Ok(r) = serde_json::from_str::<ValidationReport>(&text) {
            validation.push((rel, r));
        } else if let Ok(r) = serde_json::from_str::<ApplicationReport>(&text) {
            application.push((rel, r));
        }
    }
    if validation.is_empty() && application.is_empty() {
        return Err(Error::Inference(format!("no report JSON files under {}", input.display())));
    }
    let mut dir = OutputDir::create(out)?;
    for (rel, r) in &validation {
        dir.write(&format!("{rel}.svg"), r.to_svg().as_bytes())?;
        dir.write_with(&format!("{rel}.csv"), |p| {
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            r.write_csv(p)
        })?;
    }
    for (rel, r) in &application {
        dir.write(&format!("{rel}.svg"), r.to_svg().as_bytes())?;
        dir.write_with(&format!("{rel}.csv"), |p| {
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            r.write_csv(p)
        })?;
    }
    let entries: Vec<SummaryEntry> = validation.iter().map(|(_, r)| SummaryEntry::from(r)).collect();
    dir.write("summary.csv", &summary_csv(&entries)?)?;
    dir.commit()?;
    Ok(())
}
