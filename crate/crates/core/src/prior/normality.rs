use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::normal_cdf;

/// 5% critical value of the adjusted case-3 statistic.
pub const AD_CRITICAL_5PCT: f64 = 0.752;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AndersonDarling {
    pub a2: f64,
    pub a2_adjusted: f64,
    pub reject_at_5pct: bool,
}

/// Anderson–Darling normality test with mean and variance estimated from the
/// data, using the small-sample adjustment `A² (1 + 0.75/n + 2.25/n²)`.
pub fn anderson_darling(samples: &[f64]) -> Result<AndersonDarling> {
    let n = samples.len();
    if n < 8 {
        return Err(Error::Stats(format!("Anderson-Darling needs at least 8 samples, got {n}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Stats("samples must be finite".into()));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    if !(sd > 1e-14 * mean.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::Stats("samples have zero variance".into()));
    }
    let mut z: Vec<f64> = samples.iter().map(|x| normal_cdf((x - mean) / sd)).collect();
    z.sort_by(|a, b| a.total_cmp(b));
    let tiny = 1e-300;
    let s: f64 = (0..n)
        .map(|i| {
            let w = (2 * i + 1) as f64;
            w * (z[i].max(tiny).ln() + (1.0 - z[n - 1 - i]).max(tiny).ln())
        })
        .sum();
    let a2 = -nf - s / nf;
    let a2_adjusted = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    Ok(AndersonDarling {
        a2,
        a2_adjusted,
        reject_at_5pct: a2_adjusted > AD_CRITICAL_5PCT,
    })
}
