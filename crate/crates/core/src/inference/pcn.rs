use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{log_likelihood, log_likelihood_of_output, DiagonalNoise, ForwardModel};
use crate::error::{Error, Result};
use crate::prior::GaussianDensity;

/// Proposal family used by the sampler.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalMode {
    /// `p̂ = μ0 + √(1-s²)(p-μ0) + s L ξ`; leaves the prior invariant, so the
    /// acceptance ratio involves the likelihood only.
    #[default]
    PriorReversible,
    /// `p̂ ~ N(√(1-s²) p, s C0)` with the full Metropolis–Hastings ratio
    /// (prior, likelihood and proposal densities).
    Strict,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcnConfig {
    pub step_size: f64,
    /// Number of stored states, including the initial state `μ0`.
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: ProposalMode,
}

impl PcnConfig {
    pub fn new(step_size: f64, n_steps: usize, seed: u64) -> Self {
        PcnConfig {
            step_size,
            n_steps,
            seed,
            mode: ProposalMode::PriorReversible,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(Error::Inference(format!("step size must lie in (0, 1], got {}", self.step_size)));
        }
        if self.n_steps == 0 {
            return Err(Error::Inference("a chain needs at least one step".into()));
        }
        Ok(())
    }
}

/// A Metropolis–Hastings chain. `states[0]` is the prior mean; `accepted[k]`
/// records the transition from `states[k]` to `states[k + 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub states: Vec<DVector<f64>>,
    pub accepted: Vec<bool>,
    pub log_likelihoods: Vec<f64>,
    pub step_size: f64,
    pub seed: u64,
    pub mode: ProposalMode,
    pub acceptance_rate: f64,
}

impl Chain {
    fn start(p0: DVector<f64>, l0: f64, config: &PcnConfig) -> Self {
        let mut states = Vec::with_capacity(config.n_steps);
        states.push(p0);
        Chain {
            states,
            accepted: Vec::with_capacity(config.n_steps.saturating_sub(1)),
            log_likelihoods: vec![l0],
            step_size: config.step_size,
            seed: config.seed,
            mode: config.mode,
            acceptance_rate: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    pub fn update_acceptance_rate(&mut self) {
        self.acceptance_rate = if self.accepted.is_empty() {
            0.0
        } else {
            self.accepted.iter().filter(|a| **a).count() as f64 / self.accepted.len() as f64
        };
    }

    /// Values of one coordinate along the chain.
    pub fn trace(&self, coordinate: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[coordinate]).collect()
    }
}

fn standard_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Prior-reversible pCN proposal.
pub fn pcn_propose<R: Rng + ?Sized>(p: &DVector<f64>, prior: &GaussianDensity, s: f64, rng: &mut R) -> DVector<f64> {
    let xi = standard_normal_vector(p.len(), rng);
    let c = (1.0 - s * s).max(0.0).sqrt();
    prior.mean() + (p - prior.mean()) * c + lower_mul(prior, &xi) * s
}

/// The literal `N(√(1-s²) p, s C0)` proposal.
pub fn pcn_propose_strict<R: Rng + ?Sized>(p: &DVector<f64>, prior: &GaussianDensity, s: f64, rng: &mut R) -> DVector<f64> {
    let xi = standard_normal_vector(p.len(), rng);
    let c = (1.0 - s * s).max(0.0).sqrt();
    p * c + lower_mul(prior, &xi) * s.sqrt()
}

/// `L ξ` using only the lower triangle of the cached factor.
fn lower_mul(prior: &GaussianDensity, xi: &DVector<f64>) -> DVector<f64> {
    let l = prior.cholesky().l_dirty();
    let n = xi.len();
    let mut out = DVector::zeros(n);
    for j in 0..n {
        let x = xi[j];
        if x == 0.0 {
            continue;
        }
        for i in j..n {
            out[i] += l[(i, j)] * x;
        }
    }
    out
}

/// `min{1, exp(ℓ̂ - ℓ)}` evaluated in log space.
pub fn acceptance_probability(loglik_current: f64, loglik_proposed: f64) -> f64 {
    let d = loglik_proposed - loglik_current;
    if d >= 0.0 {
        1.0
    } else {
        d.exp()
    }
}

/// Acceptance probability of the prior-reversible proposal `p̂` from `p`.
pub fn pcn_accept_prob<F: ForwardModel + ?Sized>(
    p: &DVector<f64>,
    p_hat: &DVector<f64>,
    q_obs: &DVector<f64>,
    noise: &DiagonalNoise,
    forward: &F,
) -> Result<f64> {
    let l0 = log_likelihood(p, q_obs, noise, forward)?;
    let l1 = log_likelihood(p_hat, q_obs, noise, forward)?;
    Ok(acceptance_probability(l0, l1))
}

/// `log q(x | y)` of the strict proposal up to a constant.
fn strict_log_proposal(x: &DVector<f64>, y: &DVector<f64>, prior: &GaussianDensity, s: f64) -> f64 {
    let c = (1.0 - s * s).max(0.0).sqrt();
    let mut r = x - y * c;
    prior.cholesky().l_dirty().solve_lower_triangular_mut(&mut r);
    -0.5 * r.norm_squared() / s
}

/// Runs one chain from `μ0`. The likelihood of the current state is cached,
/// so each transition costs one forward evaluation.
///
/// A forward failure after the start aborts with [`Error::ChainAborted`],
/// which carries the states produced so far.
pub fn run_chain<F: ForwardModel + ?Sized>(
    forward: &F,
    prior: &GaussianDensity,
    q_obs: &DVector<f64>,
    noise: &DiagonalNoise,
    config: &PcnConfig,
) -> Result<Chain> {
    config.validate()?;
    if forward.input_dim() != prior.dim() {
        return Err(Error::Dimension {
            context: "forward input vs prior",
            expected: prior.dim(),
            got: forward.input_dim(),
        });
    }
    let s = config.step_size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let p0 = prior.mean().clone();
    let l0 = log_likelihood(&p0, q_obs, noise, forward)?;
    let mut chain = Chain::start(p0, l0, config);
    let mut current = chain.states[0].clone();
    let mut l_current = l0;
    for step in 1..config.n_steps {
        let proposal = match config.mode {
            ProposalMode::PriorReversible => pcn_propose(&current, prior, s, &mut rng),
            ProposalMode::Strict => pcn_propose_strict(&current, prior, s, &mut rng),
        };
        let u: f64 = rng.random();
        let l_prop = match forward.forward(&proposal).and_then(|q| log_likelihood_of_output(&q, q_obs, noise)) {
            Ok(l) => l,
            Err(e) => {
                chain.update_acceptance_rate();
                return Err(Error::ChainAborted {
                    step,
                    message: e.to_string(),
                    partial: Box::new(chain),
                });
            }
        };
        let log_ratio = match config.mode {
            ProposalMode::PriorReversible => l_prop - l_current,
            ProposalMode::Strict => {
                l_prop + prior.log_density_unnormalized(&proposal) + strict_log_proposal(&current, &proposal, prior, s)
                    - l_current
                    - prior.log_density_unnormalized(&current)
                    - strict_log_proposal(&proposal, &current, prior, s)
            }
        };
        let a = acceptance_probability(0.0, log_ratio);
        let accept = u < a;
        if accept {
            current = proposal;
            l_current = l_prop;
        }
        chain.states.push(current.clone());
        chain.log_likelihoods.push(l_current);
        chain.accepted.push(accept);
    }
    chain.update_acceptance_rate();
    Ok(chain)
}

/// Independent chains, one per seed, run concurrently and returned in seed order.
pub fn run_parallel_chains<F: ForwardModel + Sync + ?Sized>(
    forward: &F,
    prior: &GaussianDensity,
    q_obs: &DVector<f64>,
    noise: &DiagonalNoise,
    config: &PcnConfig,
    seeds: &[u64],
) -> Result<Vec<Chain>> {
    seeds
        .par_iter()
        .map(|&seed| run_chain(forward, prior, q_obs, noise, &PcnConfig { seed, ..*config }))
        .collect()
}
