//! Metropolis-adjusted Langevin algorithm with burn-in step-size adaptation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::samplers::chain::{Chain, ChainSet};
use crate::samplers::rng::{stream, Purpose, StreamRng};

/// Differentiable log density on `R^n`.
pub trait TargetDensity: Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &DVector<f64>) -> Result<f64>;

    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    fn value_and_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        Ok((self.log_density(x)?, self.grad_log_density(x)?))
    }
}

/// Target built from a closure returning value and gradient together.
pub struct FnTarget<F> {
    dim: usize,
    f: F,
}

impl<F> FnTarget<F>
where
    F: Fn(&DVector<f64>) -> Result<(f64, DVector<f64>)> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> TargetDensity for FnTarget<F>
where
    F: Fn(&DVector<f64>) -> Result<(f64, DVector<f64>)> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        Ok((self.f)(x)?.0)
    }
    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok((self.f)(x)?.1)
    }
    fn value_and_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        (self.f)(x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepSizePolicy {
    Fixed(f64),
    /// Dual averaging of `log τ` toward the target acceptance rate during burn-in only.
    DualAveraging { initial: f64, target_accept: f64 },
}

impl Default for StepSizePolicy {
    fn default() -> Self {
        StepSizePolicy::DualAveraging { initial: 0.1, target_accept: 0.574 }
    }
}

#[derive(Clone, Debug)]
pub struct MalaConfig {
    pub n_chains: usize,
    /// Retained draws per chain.
    pub n_samples: usize,
    /// Adaptation iterations per chain; defaults to 20% of `n_samples`.
    pub burn_in: Option<usize>,
    pub step_size: StepSizePolicy,
    pub seed: u64,
    /// Fixed diagonal proposal covariance (variances); identity when absent.
    pub preconditioner: Option<DVector<f64>>,
}

impl MalaConfig {
    pub fn new(n_chains: usize, n_samples: usize, seed: u64) -> Self {
        Self { n_chains, n_samples, burn_in: None, step_size: StepSizePolicy::default(), seed, preconditioner: None }
    }

    pub fn burn_in_len(&self) -> usize {
        self.burn_in.unwrap_or(self.n_samples / 5)
    }
}

/// Consecutive non-finite proposals tolerated before giving up.
const MAX_NONFINITE: usize = 1000;

struct State {
    x: DVector<f64>,
    logp: f64,
    grad: DVector<f64>,
}

fn evaluate<T: TargetDensity + ?Sized>(target: &T, x: &DVector<f64>) -> Result<Option<(f64, DVector<f64>)>> {
    match target.value_and_grad(x) {
        Ok((v, g)) if v.is_finite() && g.iter().all(|c| c.is_finite()) => Ok(Some((v, g))),
        Ok(_) | Err(Error::Support(_)) | Err(Error::Numerical(_)) | Err(Error::Domain(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `log q(to | from)` up to a constant for the Langevin proposal.
fn log_proposal(to: &DVector<f64>, from: &State, tau: f64, precond: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..to.len() {
        let mean = from.x[i] + 0.5 * tau * tau * precond[i] * from.grad[i];
        let r = to[i] - mean;
        acc += r * r / precond[i];
    }
    -acc / (2.0 * tau * tau)
}

struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_tau: f64,
    log_tau_bar: f64,
    t: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(initial: f64, target: f64) -> Self {
        Self { mu: (10.0 * initial).ln(), target, h_bar: 0.0, log_tau: initial.ln(), log_tau_bar: 0.0, t: 0.0 }
    }

    fn update(&mut self, accept_prob: f64) {
        self.t += 1.0;
        let eta = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_prob);
        self.log_tau = self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar;
        let w = self.t.powf(-Self::KAPPA);
        self.log_tau_bar = w * self.log_tau + (1.0 - w) * self.log_tau_bar;
    }
}

/// Runs one chain from `x0`.
pub fn mala_chain<T: TargetDensity + ?Sized>(
    target: &T,
    x0: &DVector<f64>,
    cfg: &MalaConfig,
    chain_index: u32,
) -> Result<Chain> {
    let n = target.dim();
    if x0.len() != n {
        return Err(Error::shape(format!("initial point has length {}, target dimension is {n}", x0.len())));
    }
    let precond = match &cfg.preconditioner {
        Some(p) if p.len() == n && p.iter().all(|v| *v > 0.0 && v.is_finite()) => p.clone(),
        Some(_) => return Err(Error::arg("preconditioner must be a positive vector of the target dimension")),
        None => DVector::from_element(n, 1.0),
    };
    let sqrt_pre = precond.map(f64::sqrt);
    let mut rng: StreamRng = stream(cfg.seed, Purpose::Mala, chain_index);
    let Some((logp, grad)) = evaluate(target, x0)? else {
        return Err(Error::Init(format!("log density is not finite at the initial point of chain {chain_index}")));
    };
    let mut state = State { x: x0.clone(), logp, grad };
    let burn = cfg.burn_in_len();
    let (mut tau, mut adapt) = match cfg.step_size {
        StepSizePolicy::Fixed(t) => (t, None),
        StepSizePolicy::DualAveraging { initial, target_accept } => (initial, Some(DualAveraging::new(initial, target_accept))),
    };
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::arg("MALA step size must be positive"));
    }
    let mut samples = DMatrix::zeros(n, cfg.n_samples);
    let mut step_sizes = Vec::with_capacity(burn + 1);
    let mut accepted = 0usize;
    let mut nonfinite = 0usize;
    for iter in 0..burn + cfg.n_samples {
        let adapting = iter < burn;
        if !adapting {
            if let Some(da) = adapt.take() {
                tau = da.log_tau_bar.exp();
            }
        }
        let xi = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let prop_x = DVector::from_fn(n, |i, _| {
            state.x[i] + 0.5 * tau * tau * precond[i] * state.grad[i] + tau * sqrt_pre[i] * xi[i]
        });
        let u: f64 = rng.random();
        let accept_prob = match evaluate(target, &prop_x)? {
            Some((lp, g)) => {
                nonfinite = 0;
                let prop = State { x: prop_x, logp: lp, grad: g };
                let log_ratio = prop.logp - state.logp + log_proposal(&state.x, &prop, tau, &precond)
                    - log_proposal(&prop.x, &state, tau, &precond);
                let a = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
                if u < a {
                    state = prop;
                    if !adapting {
                        accepted += 1;
                    }
                }
                a
            }
            None => {
                nonfinite += 1;
                if nonfinite > MAX_NONFINITE {
                    return Err(Error::Divergence(format!(
                        "chain {chain_index}: more than {MAX_NONFINITE} consecutive proposals with non-finite log density \
                         (step size {tau:e})"
                    )));
                }
                0.0
            }
        };
        if adapting {
            if let Some(da) = adapt.as_mut() {
                da.update(accept_prob);
                tau = da.log_tau.exp();
            }
            step_sizes.push(tau);
        } else {
            samples.set_column(iter - burn, &state.x);
        }
    }
    step_sizes.push(tau);
    Ok(Chain {
        seed: cfg.seed.wrapping_add(chain_index as u64),
        samples,
        acceptance_rate: if cfg.n_samples > 0 { accepted as f64 / cfg.n_samples as f64 } else { 0.0 },
        step_sizes,
    })
}

/// Runs `cfg.n_chains` independent chains in parallel.
///
/// `initial` holds one starting point shared by all chains or one per chain.
pub fn mala_sample<T: TargetDensity + ?Sized>(target: &T, initial: &[DVector<f64>], cfg: &MalaConfig) -> Result<ChainSet> {
    if cfg.n_chains == 0 {
        return Err(Error::arg("need at least one chain"));
    }
    if target.dim() == 0 {
        return Err(Error::arg("target dimension must be at least one"));
    }
    if initial.len() != 1 && initial.len() != cfg.n_chains {
        return Err(Error::arg("provide one initial point or one per chain"));
    }
    let chains: Result<Vec<Chain>> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| {
            let x0 = if initial.len() == 1 { &initial[0] } else { &initial[c] };
            mala_chain(target, x0, cfg, c as u32)
        })
        .collect();
    ChainSet::new(chains?)
}
