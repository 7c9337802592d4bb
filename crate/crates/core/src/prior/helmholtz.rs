use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HalbachArray, N_BLOCKS};

pub const HELMHOLTZ_HEADER: [&str; 6] = ["block_i", "ring_j", "mx_Am2", "my_Am2", "mz_Am2", "volume_m3"];

/// One Helmholtz-coil moment measurement of a single block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelmholtzRecord {
    /// 1-based block type.
    pub block_i: usize,
    /// 1-based ring.
    pub ring_j: usize,
    /// Total moment (A·m²).
    pub moment: [f64; 3],
    /// Block volume (m³).
    pub volume: f64,
}

impl HelmholtzRecord {
    /// Magnetization `moment / volume` (A/m).
    pub fn magnetization(&self) -> Vector3<f64> {
        Vector3::from(self.moment) / self.volume
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !(1..=N_BLOCKS).contains(&self.block_i) {
            return Err(format!("block_i = {} outside 1..={N_BLOCKS}", self.block_i));
        }
        if self.ring_j == 0 {
            return Err("ring_j must be >= 1".into());
        }
        if !(self.volume > 0.0) || !self.volume.is_finite() {
            return Err(format!("volume must be positive, got {}", self.volume));
        }
        if self.moment.iter().any(|m| !m.is_finite()) {
            return Err("moment has non-finite components".into());
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct Row {
    block_i: usize,
    ring_j: usize,
    #[serde(rename = "mx_Am2")]
    mx: f64,
    #[serde(rename = "my_Am2")]
    my: f64,
    #[serde(rename = "mz_Am2")]
    mz: f64,
    volume_m3: f64,
}

/// Reads and validates a Helmholtz CSV. Errors carry the 1-based file line.
pub fn load_helmholtz_csv(path: &Path) -> Result<Vec<HelmholtzRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != HELMHOLTZ_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}, found {}", HELMHOLTZ_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for raw in reader.records() {
        let raw = raw.map_err(|e| csv_error(path, e))?;
        let line = raw.position().map(|p| p.line() as usize).unwrap_or(0);
        let row: Row = raw.deserialize(Some(&header)).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        let rec = HelmholtzRecord {
            block_i: row.block_i,
            ring_j: row.ring_j,
            moment: [row.mx, row.my, row.mz],
            volume: row.volume_m3,
        };
        rec.validate().map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        })?;
        if !seen.insert((rec.block_i, rec.ring_j)) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("duplicate record for block {} ring {}", rec.block_i, rec.ring_j),
            });
        }
        records.push(rec);
    }
    if records.is_empty() {
        log::warn!("{} has no data rows", path.display());
    }
    Ok(records)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::io(path, source),
            _ => unreachable!(),
        },
        _ => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        },
    }
}

pub fn write_helmholtz_csv(path: &Path, records: &[HelmholtzRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(HELMHOLTZ_HEADER)?;
    for r in records {
        w.write_record(&[
            r.block_i.to_string(),
            r.ring_j.to_string(),
            r.moment[0].to_string(),
            r.moment[1].to_string(),
            r.moment[2].to_string(),
            r.volume.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Distribution of one block type's magnetization (A/m).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypeStatistics {
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
}

/// Gaussian draws of every block in `n_rings` rings, ordered ring by ring.
///
/// Covariances need only be positive semi-definite; a symmetric square root is
/// used so zero covariance reproduces the mean exactly.
pub fn synth_helmholtz(array: &HalbachArray, types: &[TypeStatistics], n_rings: usize, seed: u64) -> Result<Vec<HelmholtzRecord>> {
    if types.len() != N_BLOCKS {
        return Err(Error::Dimension {
            context: "block type statistics",
            expected: N_BLOCKS,
            got: types.len(),
        });
    }
    let roots = types
        .iter()
        .enumerate()
        .map(|(i, t)| psd_sqrt3(&t.covariance).map_err(|m| Error::Prior(format!("block type {}: {m}", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_rings * N_BLOCKS);
    for j in 1..=n_rings {
        for (i, (t, s)) in types.iter().zip(&roots).enumerate() {
            let xi = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng));
            let m = t.mean + s * xi;
            let vol = array.block_volume(i + 1)?;
            let moment = m * vol;
            out.push(HelmholtzRecord {
                block_i: i + 1,
                ring_j: j,
                moment: [moment.x, moment.y, moment.z],
                volume: vol,
            });
        }
    }
    Ok(out)
}

fn psd_sqrt3(c: &Matrix3<f64>) -> std::result::Result<Matrix3<f64>, String> {
    let scale = c.amax();
    if (c - c.transpose()).amax() > 1e-12 * scale {
        return Err("covariance is not symmetric".into());
    }
    let eig = c.symmetric_eigen();
    if eig.eigenvalues.min() < -1e-12 * scale {
        return Err(format!("covariance has negative eigenvalue {}", eig.eigenvalues.min()));
    }
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(eig.eigenvectors * Matrix3::from_diagonal(&d) * eig.eigenvectors.transpose())
}
