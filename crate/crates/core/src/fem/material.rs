use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::MU0;

/// Reluctivity of free space, `1/μ0`.
pub fn nu0() -> f64 {
    1.0 / MU0
}

/// Constitutive law `H(B)` of the soft-iron region, expressed as a
/// reluctivity `ν(B²) = H/B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HbCurve {
    /// `ν = k1 exp(k2 B²) + k3`, capped at `1/μ0`.
    Brauer { k1: f64, k2: f64, k3: f64 },
    /// Monotone cubic interpolation of tabulated `(B, H)` pairs.
    Sampled(SampledCurve),
    /// Constant relative permeability.
    Linear { mu_r: f64 },
}

impl Default for HbCurve {
    fn default() -> Self {
        HbCurve::Brauer {
            k1: 0.3774,
            k2: 2.97,
            k3: 388.33,
        }
    }
}

impl HbCurve {
    pub fn is_linear(&self) -> bool {
        matches!(self, HbCurve::Linear { .. })
    }

    /// Reluctivity at squared flux density `b2`.
    pub fn nu(&self, b2: f64) -> f64 {
        match self {
            HbCurve::Brauer { k1, k2, k3 } => (k1 * (k2 * b2).exp() + k3).min(nu0()),
            HbCurve::Sampled(c) => {
                let b = b2.sqrt();
                if b < 1e-12 {
                    c.initial_slope()
                } else {
                    c.h(b) / b
                }
            }
            HbCurve::Linear { mu_r } => nu0() / mu_r,
        }
    }

    /// `dν/d(B²)`.
    pub fn dnu_db2(&self, b2: f64) -> f64 {
        match self {
            HbCurve::Brauer { k1, k2, k3 } => {
                let v = k1 * (k2 * b2).exp();
                if v + k3 >= nu0() {
                    0.0
                } else {
                    k1 * k2 * (k2 * b2).exp()
                }
            }
            HbCurve::Sampled(c) => {
                let b = b2.sqrt();
                if b < 1e-6 {
                    // ν(B) is even and smooth near 0 for the interpolant; use a
                    // one-sided difference in B² to stay finite.
                    let e = 1e-6;
                    (c.h(e) / e - c.initial_slope()) / (e * e)
                } else {
                    (c.dh_db(b) - c.h(b) / b) / (2.0 * b * b)
                }
            }
            HbCurve::Linear { .. } => 0.0,
        }
    }

    /// `H` at flux density magnitude `b`.
    pub fn h(&self, b: f64) -> f64 {
        self.nu(b * b) * b
    }
}

/// Tabulated `B-H` curve with Fritsch–Carlson monotone cubic interpolation and
/// linear extrapolation at slope `1/μ0` above the last sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampledPoints", into = "SampledPoints")]
pub struct SampledCurve {
    b: Vec<f64>,
    h: Vec<f64>,
    slopes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SampledPoints {
    b: Vec<f64>,
    h: Vec<f64>,
}

impl TryFrom<SampledPoints> for SampledCurve {
    type Error = Error;
    fn try_from(p: SampledPoints) -> Result<Self> {
        SampledCurve::new(p.b, p.h)
    }
}

impl From<SampledCurve> for SampledPoints {
    fn from(c: SampledCurve) -> Self {
        SampledPoints { b: c.b, h: c.h }
    }
}

#[derive(Deserialize)]
struct HbRow {
    #[serde(rename = "B_T")]
    b: f64,
    #[serde(rename = "H_A_per_m")]
    h: f64,
}

impl SampledCurve {
    /// Builds the interpolant. `(0, 0)` is prepended when absent. Both columns
    /// must increase strictly.
    pub fn new(mut b: Vec<f64>, mut h: Vec<f64>) -> Result<Self> {
        if b.len() != h.len() {
            return Err(Error::Material("B and H columns differ in length".into()));
        }
        if b.first().is_none_or(|&b0| b0 != 0.0) {
            b.insert(0, 0.0);
            h.insert(0, 0.0);
        } else if h[0] != 0.0 {
            return Err(Error::Material("H must vanish at B = 0".into()));
        }
        if b.len() < 3 {
            return Err(Error::Material("at least two nonzero samples are required".into()));
        }
        for k in 1..b.len() {
            if !(b[k] > b[k - 1]) || !(h[k] > h[k - 1]) || !b[k].is_finite() || !h[k].is_finite() {
                return Err(Error::Material(format!(
                    "samples must increase strictly in both B and H (row {k})"
                )));
            }
        }
        let slopes = fritsch_carlson(&b, &h);
        Ok(SampledCurve { b, h, slopes })
    }

    /// Reads a two-column CSV with header `B_T,H_A_per_m`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?;
        let header = reader
            .headers()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        if header.iter().collect::<Vec<_>>() != ["B_T", "H_A_per_m"] {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "expected header B_T,H_A_per_m".into(),
            });
        }
        let (mut b, mut h) = (Vec::new(), Vec::new());
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let row: HbRow = rec.deserialize(Some(&header)).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
            b.push(row.b);
            h.push(row.h);
        }
        Self::new(b, h)
    }

    pub fn samples(&self) -> (&[f64], &[f64]) {
        (&self.b, &self.h)
    }

    fn initial_slope(&self) -> f64 {
        self.slopes[0]
    }

    fn segment(&self, b: f64) -> usize {
        match self.b.binary_search_by(|x| x.total_cmp(&b)) {
            Ok(k) => k.min(self.b.len() - 2),
            Err(k) => k.saturating_sub(1).min(self.b.len() - 2),
        }
    }

    pub fn h(&self, b: f64) -> f64 {
        let n = self.b.len();
        if b >= self.b[n - 1] {
            return self.h[n - 1] + nu0() * (b - self.b[n - 1]);
        }
        let k = self.segment(b);
        let (x0, x1) = (self.b[k], self.b[k + 1]);
        let dx = x1 - x0;
        let t = (b - x0) / dx;
        let (h00, h10, h01, h11) = (
            2.0 * t.powi(3) - 3.0 * t * t + 1.0,
            t.powi(3) - 2.0 * t * t + t,
            -2.0 * t.powi(3) + 3.0 * t * t,
            t.powi(3) - t * t,
        );
        h00 * self.h[k] + h10 * dx * self.slopes[k] + h01 * self.h[k + 1] + h11 * dx * self.slopes[k + 1]
    }

    pub fn dh_db(&self, b: f64) -> f64 {
        let n = self.b.len();
        if b >= self.b[n - 1] {
            return nu0();
        }
        let k = self.segment(b);
        let (x0, x1) = (self.b[k], self.b[k + 1]);
        let dx = x1 - x0;
        let t = (b - x0) / dx;
        let (d00, d10, d01, d11) = (
            6.0 * t * t - 6.0 * t,
            3.0 * t * t - 4.0 * t + 1.0,
            -6.0 * t * t + 6.0 * t,
            3.0 * t * t - 2.0 * t,
        );
        (d00 * self.h[k] + d01 * self.h[k + 1]) / dx + d10 * self.slopes[k] + d11 * self.slopes[k + 1]
    }
}

fn fritsch_carlson(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k])).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for k in 1..n - 1 {
        m[k] = if delta[k - 1] * delta[k] <= 0.0 { 0.0 } else { 0.5 * (delta[k - 1] + delta[k]) };
    }
    for k in 0..n - 1 {
        let a = m[k] / delta[k];
        let b = m[k + 1] / delta[k];
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            m[k] = tau * a * delta[k];
            m[k + 1] = tau * b * delta[k];
        }
    }
    m
}

/// Material assignment for the finite-element model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Materials {
    /// Recoil permeability of the magnet blocks.
    pub magnet_mu_r: f64,
    /// Law of the iron region. Ignored when the mesh has no iron.
    pub iron: HbCurve,
}

impl Default for Materials {
    fn default() -> Self {
        Materials {
            magnet_mu_r: 1.0,
            iron: HbCurve::default(),
        }
    }
}

impl Materials {
    pub fn linear(magnet_mu_r: f64, iron_mu_r: f64) -> Self {
        Materials {
            magnet_mu_r,
            iron: HbCurve::Linear { mu_r: iron_mu_r },
        }
    }

    pub fn magnet_nu(&self) -> f64 {
        nu0() / self.magnet_mu_r
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.magnet_mu_r >= 1.0) || !self.magnet_mu_r.is_finite() {
            return Err(Error::Material(format!("magnet recoil permeability must be >= 1, got {}", self.magnet_mu_r)));
        }
        match &self.iron {
            HbCurve::Brauer { k1, k2, k3 } if !(*k1 >= 0.0 && *k2 >= 0.0 && *k3 > 0.0) => {
                Err(Error::Material("Brauer coefficients must be non-negative with k3 > 0".into()))
            }
            HbCurve::Linear { mu_r } if !(*mu_r >= 1.0) => Err(Error::Material("iron permeability must be >= 1".into())),
            _ => Ok(()),
        }
    }
}
