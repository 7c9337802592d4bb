use nalgebra::{DMatrix, DVector};

use super::Chain;
use crate::error::{Error, Result};
use crate::stats::effective_sample_size;

/// Minimum number of states left after burn-in.
pub const MIN_RETAINED: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Monte Carlo standard error of each mean, `std / √ESS`.
    pub std_error: DVector<f64>,
    pub ess: DVector<f64>,
    /// States dropped from the start of each chain.
    pub burn_in: usize,
    pub n_retained: usize,
    pub acceptance_rate: f64,
    /// Coordinates that never moved after burn-in (ESS undefined, reported as n).
    pub frozen: Vec<usize>,
}

impl PosteriorSummary {
    pub fn variances(&self) -> DVector<f64> {
        self.covariance.diagonal()
    }
}

fn burn_in_count(len: usize, fraction: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Inference(format!("burn-in fraction must lie in [0, 1), got {fraction}")));
    }
    Ok((len as f64 * fraction).floor() as usize)
}

/// Sample statistics of the states after dropping `floor(len · fraction)`.
pub fn summarize_chain(chain: &Chain, burn_in_fraction: f64) -> Result<PosteriorSummary> {
    summarize_pooled(std::slice::from_ref(chain), burn_in_fraction)
}

/// Pools the post-burn-in states of several chains. ESS values add across
/// chains; each chain's ESS is computed on its own series.
pub fn summarize_pooled(chains: &[Chain], burn_in_fraction: f64) -> Result<PosteriorSummary> {
    let first = chains.first().ok_or_else(|| Error::Inference("no chains to summarize".into()))?;
    let dim = first.dim();
    let burn_in = burn_in_count(first.len(), burn_in_fraction)?;
    let mut retained: Vec<&DVector<f64>> = Vec::new();
    let mut ess: DVector<f64> = DVector::zeros(dim);
    let mut frozen = vec![false; dim];
    let mut accepted = 0usize;
    let mut transitions = 0usize;
    for c in chains {
        if c.dim() != dim {
            return Err(Error::Dimension {
                context: "pooled chain",
                expected: dim,
                got: c.dim(),
            });
        }
        let b = burn_in_count(c.len(), burn_in_fraction)?;
        let kept = &c.states[b.min(c.len())..];
        if kept.len() < MIN_RETAINED {
            return Err(Error::Inference(format!(
                "chain has {} states after burn-in, at least {MIN_RETAINED} are required",
                kept.len()
            )));
        }
        retained.extend(kept.iter());
        for (k, e) in ess.iter_mut().enumerate() {
            let series: Vec<f64> = kept.iter().map(|s| s[k]).collect();
            match effective_sample_size(&series) {
                Some(v) => *e += v,
                None => {
                    frozen[k] = true;
                    *e += kept.len() as f64;
                }
            }
        }
        accepted += c.accepted.iter().filter(|a| **a).count();
        transitions += c.accepted.len();
    }
    let n = retained.len();
    let mut mean = DVector::zeros(dim);
    for s in &retained {
        mean += *s;
    }
    mean /= n as f64;
    let mut covariance: DMatrix<f64> = DMatrix::zeros(dim, dim);
    for s in &retained {
        let r = *s - &mean;
        covariance.ger(1.0, &r, &r, 1.0);
    }
    covariance /= (n - 1) as f64;
    let std_error = DVector::from_fn(dim, |k, _| (covariance[(k, k)].max(0.0) / ess[k]).sqrt());
    let frozen: Vec<usize> = frozen.iter().enumerate().filter(|(_, f)| **f).map(|(k, _)| k).collect();
    if !frozen.is_empty() {
        log::warn!("{} coordinates never moved after burn-in; their ESS is undefined", frozen.len());
    }
    Ok(PosteriorSummary {
        mean,
        covariance,
        std_error,
        ess,
        burn_in,
        n_retained: n,
        acceptance_rate: if transitions == 0 { 0.0 } else { accepted as f64 / transitions as f64 },
        frozen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::ProposalMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn chain_from(states: Vec<DVector<f64>>) -> Chain {
        let n = states.len();
        Chain {
            accepted: vec![true; n - 1],
            log_likelihoods: vec![0.0; n],
            states,
            step_size: 0.1,
            seed: 0,
            mode: ProposalMode::PriorReversible,
            acceptance_rate: 1.0,
        }
    }

    #[test]
    fn constant_chain() {
        let s = DVector::from_vec(vec![1.5, -2.0]);
        let c = chain_from(vec![s.clone(); 300]);
        let sum = summarize_chain(&c, 0.1).unwrap();
        assert_eq!(sum.mean, s);
        assert!(sum.covariance.iter().all(|v| *v == 0.0));
        assert_eq!(sum.frozen, vec![0, 1]);
        assert!(sum.ess.iter().all(|e| *e <= 270.0));
    }

    #[test]
    fn iid_ess_near_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let states: Vec<_> = (0..5000).map(|_| DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng))).collect();
        let sum = summarize_chain(&chain_from(states), 0.0).unwrap();
        for e in sum.ess.iter() {
            assert!((e / 5000.0 - 1.0).abs() < 0.1, "ess {e}");
            assert!(*e <= 5000.0);
        }
    }

    #[test]
    fn burn_in_counts() {
        let states = vec![DVector::from_element(1, 0.0); 18000];
        let sum = summarize_chain(&chain_from(states), 0.1).unwrap();
        assert_eq!(sum.n_retained, 16200);
        assert_eq!(sum.burn_in, 1800);
    }

    #[test]
    fn short_chain_rejected() {
        let c = chain_from(vec![DVector::from_element(1, 0.0); 105]);
        assert!(summarize_chain(&c, 0.1).is_err());
        assert!(summarize_chain(&c, 1.0).is_err());
    }

    #[test]
    fn pooled_statistics() {
        let a = chain_from((0..200).map(|k| DVector::from_element(1, k as f64)).collect());
        let b = chain_from((0..200).map(|k| DVector::from_element(1, -(k as f64))).collect());
        let s = summarize_pooled(&[a, b], 0.0).unwrap();
        assert_eq!(s.n_retained, 400);
        assert!(s.mean[0].abs() < 1e-12);
    }
}
