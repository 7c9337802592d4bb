//! Small statistical helpers shared by the prior, inference and harness modules.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Small-λ form converges faster here.
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let mut s = 0.0;
        for j in 0..50 {
            let k = (2 * j + 1) as f64;
            s += y.powf(k * k);
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        s += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
///
/// Returns the statistic `D` and an asymptotic p-value with the usual
/// finite-sample correction of the scale factor.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<(f64, f64)> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::Stats("KS test needs at least one sample".into()));
    }
    let mut x = samples.to_vec();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Stats("KS test samples must be finite".into()));
    }
    x.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (k, v) in x.iter().enumerate() {
        let f = cdf(*v);
        d = d.max((k as f64 + 1.0) / nf - f).max(f - k as f64 / nf);
    }
    let sq = nf.sqrt();
    let p = kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d);
    Ok((d, p))
}

/// Sample mean and unbiased sample covariance of row-wise samples.
pub fn mean_and_covariance(samples: &[DVector<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Stats(format!("covariance needs at least 2 samples, got {n}")));
    }
    let d = samples[0].len();
    let mut mean = DVector::zeros(d);
    for s in samples {
        if s.len() != d {
            return Err(Error::Dimension {
                context: "sample",
                expected: d,
                got: s.len(),
            });
        }
        mean += s;
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for s in samples {
        let r = s - &mean;
        cov.ger(1.0, &r, &r, 1.0);
    }
    cov /= (n - 1) as f64;
    Ok((mean, cov))
}

/// Effective sample size of a scalar series by Geyer's initial positive
/// sequence: autocovariances are summed in adjacent pairs until a pair sum
/// turns non-positive. The result is clamped to `[1, n]`.
///
/// Returns `None` for a constant series.
pub fn effective_sample_size(x: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 4 {
        return Some(n as f64);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let gamma = |lag: usize| -> f64 { c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 };
    let g0 = gamma(0);
    if !(g0 > 0.0) {
        return None;
    }
    let mut tau = -g0;
    let mut prev_pair = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let mut pair = gamma(2 * m) + gamma(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        // Monotone sequence variant: pair sums may not increase.
        pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        m += 1;
    }
    let tau = tau / g0;
    Some((n as f64 / tau.max(1e-12)).clamp(1.0, n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn kolmogorov_known_values() {
        // Tabulated critical values of the limiting distribution.
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 5e-4);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 2e-4);
        assert!((kolmogorov_sf(1.224) - 0.10).abs() < 1e-3);
        // The two series branches agree where they meet.
        assert!((kolmogorov_sf(1.1799) - kolmogorov_sf(1.1801)).abs() < 1e-3);
        assert!((kolmogorov_sf(0.5) - 0.9639).abs() < 1e-3);
    }

    #[test]
    fn ks_accepts_normal_rejects_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
        let (_, p) = ks_test(&x, normal_cdf).unwrap();
        assert!(p > 0.01);
        let y: Vec<f64> = x.iter().map(|v| v + 0.2).collect();
        let (_, p) = ks_test(&y, normal_cdf).unwrap();
        assert!(p < 1e-4);
    }

    #[test]
    fn ks_uniform_pvalues_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 2000;
        let mut rejected = 0;
        for _ in 0..trials {
            let x: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
            if ks_test(&x, normal_cdf).unwrap().1 < 0.05 {
                rejected += 1;
            }
        }
        let rate = rejected as f64 / trials as f64;
        assert!((rate - 0.05).abs() < 0.015, "rate {rate}");
    }

    #[test]
    fn iid_ess_close_to_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..10000).map(|_| rng.sample(StandardNormal)).collect();
        let ess = effective_sample_size(&x).unwrap();
        assert!((ess / 10000.0 - 1.0).abs() < 0.1, "ess {ess}");
    }

    #[test]
    fn ar1_ess_matches_theory() {
        // AR(1) with coefficient φ has integrated autocorrelation (1+φ)/(1-φ).
        let phi: f64 = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = vec![0.0; 100_000];
        for k in 1..x.len() {
            let e: f64 = rng.sample(StandardNormal);
            x[k] = phi * x[k - 1] + (1.0 - phi * phi).sqrt() * e;
        }
        let ess = effective_sample_size(&x).unwrap();
        let expected = x.len() as f64 * (1.0 - phi) / (1.0 + phi);
        assert!((ess / expected - 1.0).abs() < 0.2, "ess {ess} vs {expected}");
    }

    #[test]
    fn constant_series_has_no_ess() {
        assert!(effective_sample_size(&[1.0; 100]).is_none());
    }

    #[test]
    fn covariance_matches_hand_computation() {
        let s = vec![
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![3.0, 1.0]),
            DVector::from_vec(vec![2.0, 6.0]),
        ];
        let (m, c) = mean_and_covariance(&s).unwrap();
        assert_eq!(m, DVector::from_vec(vec![2.0, 3.0]));
        // Deviations: (-1,-1), (1,-2), (0,3).
        assert!((c[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((c[(1, 1)] - 7.0).abs() < 1e-15);
        assert!((c[(0, 1)] - (-0.5)).abs() < 1e-15);
    }
}
