use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::manifest::Artifact;
use super::matrix::{decode_matrix, encode_matrix, sha256_hex};
use crate::error::{Error, Result};
use crate::field::{assemble_linear_operator, LinearOperator};
use crate::geometry::{HalbachArray, ParameterLayout, ParameterVector};
use crate::inference::{Chain, ProposalMode};
use crate::observables::{ObservableSpec, Observation};
use crate::prior::GaussianDensity;

pub const STORE_VERSION: u32 = 1;

fn check_version(path: &Path, found: u32) -> Result<()> {
    if found != STORE_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found,
            expected: STORE_VERSION,
        });
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from(name), |p| p.join(name))
}

fn file_name(stem: &str) -> &str {
    Path::new(stem).file_name().and_then(|s| s.to_str()).unwrap_or(stem)
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

// ---------------------------------------------------------------------------
// Gaussian densities
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityFile {
    format_version: u32,
    dim: usize,
    layout: Option<ParameterLayout>,
    labels: Option<Vec<String>>,
    mean: Vec<f64>,
    jitter: f64,
    covariance_file: String,
    covariance_sha256: String,
}

/// A density read back from disk together with its optional layout.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredDensity {
    pub density: GaussianDensity,
    pub layout: Option<ParameterLayout>,
}

/// `{stem}.json` (mean, jitter, checksum) and `{stem}.hbmx` (covariance).
pub fn density_artifacts(stem: &str, density: &GaussianDensity, layout: Option<ParameterLayout>) -> Result<Vec<Artifact>> {
    if let Some(l) = layout {
        if l.dim() != density.dim() {
            return Err(Error::Dimension {
                context: "density layout",
                expected: density.dim(),
                got: l.dim(),
            });
        }
    }
    let cov = encode_matrix(density.covariance());
    let cov_name = format!("{stem}.hbmx");
    let meta = DensityFile {
        format_version: STORE_VERSION,
        dim: density.dim(),
        layout,
        labels: layout.map(|l| l.labels()),
        mean: density.mean().iter().copied().collect(),
        jitter: density.jitter(),
        covariance_file: file_name(&cov_name).to_string(),
        covariance_sha256: sha256_hex(&cov),
    };
    Ok(vec![Artifact::json(format!("{stem}.json"), &meta)?, Artifact::new(cov_name, cov)])
}

pub fn save_density(dir: &Path, stem: &str, density: &GaussianDensity, layout: Option<ParameterLayout>) -> Result<PathBuf> {
    for a in density_artifacts(stem, density, layout)? {
        let p = dir.join(&a.name);
        std::fs::write(&p, &a.bytes).map_err(|e| Error::io(&p, e))?;
    }
    Ok(dir.join(format!("{stem}.json")))
}

/// Loads the JSON descriptor at `path` and the covariance file it names.
pub fn load_density(path: &Path) -> Result<StoredDensity> {
    let meta: DensityFile = read_json(path)?;
    check_version(path, meta.format_version)?;
    let cov_path = sibling(path, &meta.covariance_file);
    let bytes = std::fs::read(&cov_path).map_err(|e| Error::io(&cov_path, e))?;
    if sha256_hex(&bytes) != meta.covariance_sha256 {
        return Err(Error::Checksum(cov_path));
    }
    let cov = decode_matrix(&bytes, &cov_path)?;
    if meta.mean.len() != meta.dim || cov.nrows() != meta.dim {
        return Err(Error::Dimension {
            context: "stored density",
            expected: meta.dim,
            got: cov.nrows(),
        });
    }
    let density = GaussianDensity::from_stored(DVector::from_vec(meta.mean), cov, meta.jitter)?;
    Ok(StoredDensity {
        density,
        layout: meta.layout,
    })
}

// ---------------------------------------------------------------------------
// Parameter vectors
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParameterFile {
    format_version: u32,
    layout: ParameterLayout,
    labels: Vec<String>,
    values: Vec<f64>,
}

pub fn parameter_artifact(name: &str, p: &ParameterVector) -> Result<Artifact> {
    Artifact::json(
        name,
        &ParameterFile {
            format_version: STORE_VERSION,
            layout: p.layout,
            labels: p.layout.labels(),
            values: p.values.iter().copied().collect(),
        },
    )
}

pub fn load_parameters(path: &Path) -> Result<ParameterVector> {
    let f: ParameterFile = read_json(path)?;
    check_version(path, f.format_version)?;
    ParameterVector::new(DVector::from_vec(f.values), f.layout)
}

// ---------------------------------------------------------------------------
// Chains
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainMetadata {
    pub format_version: u32,
    pub seed: u64,
    pub step_size: f64,
    pub mode: ProposalMode,
    pub n_states: usize,
    pub acceptance_rate: f64,
    pub accepted: Vec<bool>,
    pub log_likelihoods: Vec<f64>,
}

/// `{stem}.csv`: one state per row under the parameter labels, 17 significant
/// digits. `{stem}.json`: seed, step size, acceptance flags and likelihoods.
pub fn chain_artifacts(stem: &str, chain: &Chain, labels: &[String]) -> Result<Vec<Artifact>> {
    if labels.len() != chain.dim() {
        return Err(Error::Dimension {
            context: "chain labels",
            expected: chain.dim(),
            got: labels.len(),
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(labels)?;
    for s in &chain.states {
        w.write_record(s.iter().map(|v| fmt(*v)))?;
    }
    let csv_bytes = w.into_inner().map_err(|e| Error::Io {
        path: PathBuf::from(format!("{stem}.csv")),
        source: e.into_error(),
    })?;
    let meta = ChainMetadata {
        format_version: STORE_VERSION,
        seed: chain.seed,
        step_size: chain.step_size,
        mode: chain.mode,
        n_states: chain.len(),
        acceptance_rate: chain.acceptance_rate,
        accepted: chain.accepted.clone(),
        log_likelihoods: chain.log_likelihoods.clone(),
    };
    Ok(vec![Artifact::new(format!("{stem}.csv"), csv_bytes), Artifact::json(format!("{stem}.json"), &meta)?])
}

/// Reads the chain CSV at `csv_path` and the metadata JSON next to it.
pub fn load_chain(csv_path: &Path) -> Result<(Chain, Vec<String>)> {
    let meta_path = csv_path.with_extension("json");
    let meta: ChainMetadata = read_json(&meta_path)?;
    check_version(&meta_path, meta.format_version)?;
    let mut r = csv::Reader::from_path(csv_path)?;
    let labels: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut states = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let values: Vec<f64> = rec
            .iter()
            .map(|v| {
                v.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: csv_path.to_path_buf(),
                    line: line + 2,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != labels.len() {
            return Err(Error::Parse {
                path: csv_path.to_path_buf(),
                line: line + 2,
                message: format!("expected {} values, found {}", labels.len(), values.len()),
            });
        }
        states.push(DVector::from_vec(values));
    }
    if states.len() != meta.n_states || meta.accepted.len() + 1 != meta.n_states.max(1) {
        return Err(Error::Parse {
            path: csv_path.to_path_buf(),
            line: 0,
            message: format!("metadata lists {} states, file has {}", meta.n_states, states.len()),
        });
    }
    let chain = Chain {
        states,
        accepted: meta.accepted,
        log_likelihoods: meta.log_likelihoods,
        step_size: meta.step_size,
        seed: meta.seed,
        mode: meta.mode,
        acceptance_rate: meta.acceptance_rate,
    };
    Ok((chain, labels))
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

pub const OBSERVATION_HEADER: [&str; 5] = ["kind", "z_m", "index", "value_T", "sigma_T"];

/// `{stem}.csv` with the observation rows and `{stem}.spec.json` with the spec.
pub fn observation_artifacts(stem: &str, obs: &Observation) -> Result<Vec<Artifact>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(OBSERVATION_HEADER)?;
    for (k, (kind, z, index)) in obs.spec.row_keys().into_iter().enumerate() {
        w.write_record([kind, fmt(z), index.to_string(), fmt(obs.values[k]), fmt(obs.sigma[k])])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: PathBuf::from(format!("{stem}.csv")),
        source: e.into_error(),
    })?;
    Ok(vec![Artifact::new(format!("{stem}.csv"), bytes), Artifact::json(format!("{stem}.spec.json"), &obs.spec)?])
}

/// Spec file paired with an observation CSV.
pub fn observation_spec_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("observation");
    sibling(csv_path, &format!("{stem}.spec.json"))
}

/// Reads an observation CSV, checking each row against the paired spec.
pub fn load_observation(csv_path: &Path) -> Result<Observation> {
    let spec: ObservableSpec = read_json(&observation_spec_path(csv_path))?;
    let keys = spec.row_keys();
    let mut r = csv::Reader::from_path(csv_path)?;
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != OBSERVATION_HEADER {
        return Err(Error::Parse {
            path: csv_path.to_path_buf(),
            line: 1,
            message: format!("expected header {}", OBSERVATION_HEADER.join(",")),
        });
    }
    let (mut values, mut sigma) = (Vec::new(), Vec::new());
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |message: String| Error::Parse {
            path: csv_path.to_path_buf(),
            line: k + 2,
            message,
        };
        let num = |i: usize| -> Result<f64> { rec[i].trim().parse::<f64>().map_err(|e| bad(format!("column {}: {e}", OBSERVATION_HEADER[i]))) };
        let (kind, z, index) = keys.get(k).ok_or_else(|| bad("more rows than the spec describes".into()))?;
        let row_index: usize = rec[2].trim().parse().map_err(|e| bad(format!("index: {e}")))?;
        if rec[0].trim() != kind || row_index != *index || (num(1)? - z).abs() > 1e-12 * z.abs().max(1.0) {
            return Err(bad(format!("row does not match the spec entry ({kind}, {z}, {index})")));
        }
        values.push(num(3)?);
        sigma.push(num(4)?);
    }
    if values.len() != keys.len() {
        return Err(Error::Parse {
            path: csv_path.to_path_buf(),
            line: values.len() + 1,
            message: format!("spec describes {} rows, file has {}", keys.len(), values.len()),
        });
    }
    Observation::new(values, spec, sigma)
}

// ---------------------------------------------------------------------------
// Operator cache
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorSidecar {
    format_version: u32,
    layout: ParameterLayout,
    row_labels: Vec<String>,
    matrix_sha256: String,
}

/// Hash of everything the analytic operator depends on.
pub fn operator_cache_key(array: &HalbachArray, spec: &ObservableSpec, layout: ParameterLayout) -> Result<String> {
    let text = serde_json::to_string(&(STORE_VERSION, array, spec, layout))?;
    Ok(sha256_hex(text.as_bytes()))
}

pub fn save_operator(dir: &Path, key: &str, op: &LinearOperator) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bytes = encode_matrix(&op.matrix);
    let sidecar = OperatorSidecar {
        format_version: STORE_VERSION,
        layout: op.layout,
        row_labels: op.row_labels.clone(),
        matrix_sha256: sha256_hex(&bytes),
    };
    let mp = dir.join(format!("{key}.hbmx"));
    std::fs::write(&mp, &bytes).map_err(|e| Error::io(&mp, e))?;
    let jp = dir.join(format!("{key}.json"));
    std::fs::write(&jp, serde_json::to_vec(&sidecar)?).map_err(|e| Error::io(&jp, e))
}

pub fn load_operator(dir: &Path, key: &str) -> Result<LinearOperator> {
    let jp = dir.join(format!("{key}.json"));
    let sidecar: OperatorSidecar = read_json(&jp)?;
    check_version(&jp, sidecar.format_version)?;
    let mp = dir.join(format!("{key}.hbmx"));
    let bytes = std::fs::read(&mp).map_err(|e| Error::io(&mp, e))?;
    if sha256_hex(&bytes) != sidecar.matrix_sha256 {
        return Err(Error::Checksum(mp));
    }
    LinearOperator::new(decode_matrix(&bytes, &mp)?, sidecar.layout, sidecar.row_labels)
}

/// Returns the cached operator for this configuration, assembling and
/// storing it on a miss. A damaged cache entry is rebuilt.
pub fn load_or_assemble_operator(
    cache_dir: &Path,
    array: &HalbachArray,
    spec: &ObservableSpec,
    layout: ParameterLayout,
) -> Result<LinearOperator> {
    let key = operator_cache_key(array, spec, layout)?;
    if cache_dir.join(format!("{key}.json")).exists() {
        match load_operator(cache_dir, &key) {
            Ok(op) => {
                log::info!("operator cache hit {key}");
                return Ok(op);
            }
            Err(e) => log::warn!("ignoring damaged operator cache entry {key}: {e}"),
        }
    }
    let op = assemble_linear_operator(array, spec, layout)?;
    save_operator(cache_dir, &key, &op)?;
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_default_array, GeometryConfig};
    use crate::inference::{run_chain, DiagonalNoise, PcnConfig};
    use crate::observables::Component;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn write_all(dir: &Path, arts: &[Artifact]) {
        for a in arts {
            std::fs::write(dir.join(&a.name), &a.bytes).unwrap();
        }
    }

    fn density() -> GaussianDensity {
        let a = DMatrix::from_fn(32, 32, |i, j| ((i * 3 + j * 5) % 7) as f64 * 0.1);
        let cov = &a * a.transpose() + DMatrix::identity(32, 32) * 1e6 / 3.0;
        GaussianDensity::new(DVector::from_fn(32, |k, _| 1e5 * (k as f64).cos()), cov).unwrap()
    }

    #[test]
    fn density_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = density();
        let path = save_density(dir.path(), "prior", &g, Some(ParameterLayout::cross_section())).unwrap();
        let back = load_density(&path).unwrap();
        assert_eq!(back.density, g);
        assert_eq!(back.layout, Some(ParameterLayout::cross_section()));
    }

    #[test]
    fn jittered_density_keeps_its_jitter() {
        let dir = tempfile::tempdir().unwrap();
        let v = DVector::from_vec(vec![1.0, 1.0]);
        let g = GaussianDensity::with_jitter(DVector::zeros(2), &v * v.transpose()).unwrap();
        assert!(g.jitter() > 0.0);
        let back = load_density(&save_density(dir.path(), "p", &g, None).unwrap()).unwrap();
        assert_eq!(back.density, g);
    }

    #[test]
    fn parameter_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let layout = ParameterLayout::new(12, 3).unwrap();
        let p = ParameterVector::new(DVector::from_fn(layout.dim(), |k, _| (k as f64).sqrt() * 1e5 / 7.0), layout).unwrap();
        write_all(dir.path(), &[parameter_artifact("p.json", &p).unwrap()]);
        assert_eq!(load_parameters(&dir.path().join("p.json")).unwrap(), p);
    }

    #[test]
    fn corrupted_covariance_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_density(dir.path(), "prior", &density(), None).unwrap();
        let cov = dir.path().join("prior.hbmx");
        let mut bytes = std::fs::read(&cov).unwrap();
        bytes[100] ^= 0x10;
        std::fs::write(&cov, bytes).unwrap();
        assert!(matches!(load_density(&path), Err(Error::Checksum(_))));
    }

    #[test]
    fn density_version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_density(dir.path(), "prior", &density(), None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(load_density(&path), Err(Error::Version { found: 7, .. })));
    }

    fn chain() -> (Chain, Vec<String>) {
        let prior = density();
        let h = DMatrix::from_fn(4, 32, |i, j| 1e-7 * ((i + j) % 5) as f64);
        let op = LinearOperator::new(h.clone(), ParameterLayout::cross_section(), (0..4).map(|k| k.to_string()).collect()).unwrap();
        let q = &h * prior.mean();
        let noise = DiagonalNoise::uniform(1e-4, 4).unwrap();
        let c = run_chain(&op, &prior, &q, &noise, &PcnConfig::new(0.1, 50, 9)).unwrap();
        (c, ParameterLayout::cross_section().labels())
    }

    #[test]
    fn chain_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (c, labels) = chain();
        write_all(dir.path(), &chain_artifacts("chain", &c, &labels).unwrap());
        let (back, back_labels) = load_chain(&dir.path().join("chain.csv")).unwrap();
        assert_eq!(back_labels, labels);
        assert_eq!(back, c);
        let text = std::fs::read_to_string(dir.path().join("chain.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap().split(',').count(), 32);
        assert_eq!(text.lines().count(), 51);
    }

    #[test]
    fn truncated_chain_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (c, labels) = chain();
        write_all(dir.path(), &chain_artifacts("chain", &c, &labels).unwrap());
        let p = dir.path().join("chain.csv");
        let text = std::fs::read_to_string(&p).unwrap();
        let cut: Vec<&str> = text.lines().take(20).collect();
        std::fs::write(&p, cut.join("\n")).unwrap();
        assert!(matches!(load_chain(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn observation_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for spec in [
            ObservableSpec::fourier(0.075, 3, 20, vec![-0.1, 0.0]),
            ObservableSpec::circle_points(0.05, 4, &[0.0], vec![Component::X, Component::Y]),
        ] {
            let n = spec.len();
            let obs = Observation::new(
                (0..n).map(|k| 0.1 * (k as f64).sin() + 1e-17).collect(),
                spec,
                (0..n).map(|k| 1e-4 * (1.0 + k as f64)).collect(),
            )
            .unwrap();
            write_all(dir.path(), &observation_artifacts("obs", &obs).unwrap());
            let csv_path = dir.path().join("obs.csv");
            let header = std::fs::read_to_string(&csv_path).unwrap();
            assert!(header.starts_with("kind,z_m,index,value_T,sigma_T\n"));
            assert_eq!(load_observation(&csv_path).unwrap(), obs);
        }
    }

    #[test]
    fn observation_rows_must_match_the_spec() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ObservableSpec::fourier(0.075, 2, 20, vec![0.0]);
        let obs = Observation::new(vec![1.0; 4], spec, vec![1e-6; 4]).unwrap();
        write_all(dir.path(), &observation_artifacts("obs", &obs).unwrap());
        let p = dir.path().join("obs.csv");
        let text = std::fs::read_to_string(&p).unwrap().replacen("A,", "B,", 1);
        std::fs::write(&p, text).unwrap();
        assert!(matches!(load_observation(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn operator_cache_hits_and_rebuilds() {
        let dir = tempfile::tempdir().unwrap();
        let array = build_default_array(&GeometryConfig::default()).unwrap();
        let spec = ObservableSpec::fourier(0.075, 2, 20, vec![0.0]);
        let layout = ParameterLayout::cross_section();
        let a = load_or_assemble_operator(dir.path(), &array, &spec, layout).unwrap();
        let key = operator_cache_key(&array, &spec, layout).unwrap();
        assert!(dir.path().join(format!("{key}.hbmx")).exists());
        let b = load_or_assemble_operator(dir.path(), &array, &spec, layout).unwrap();
        assert_eq!(a, b);
        let other = ObservableSpec::fourier(0.075, 3, 20, vec![0.0]);
        assert_ne!(operator_cache_key(&array, &other, layout).unwrap(), key);
        std::fs::write(dir.path().join(format!("{key}.hbmx")), b"junk").unwrap();
        assert!(matches!(load_operator(dir.path(), &key), Err(Error::Checksum(_))));
        assert_eq!(load_or_assemble_operator(dir.path(), &array, &spec, layout).unwrap(), a);
    }

    proptest! {
        #[test]
        fn csv_numbers_survive_round_trip(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            prop_assert_eq!(fmt(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
