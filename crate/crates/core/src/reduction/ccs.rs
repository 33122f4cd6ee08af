use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::mixing::{ReducedVEvaluator, WSpaceEvaluator};
use crate::model::{DiagonalCovariance, LinearGaussianModel};
use crate::reduction::CoordinateSplit;
use crate::samplers::mala::{mala_sample, MalaConfig, TargetDensity};
use crate::samplers::rng::{stream, Purpose};
use crate::samplers::rto::{Cgls, LsqSolver};
use crate::samplers::{exponential_sample, Chain, ChainSet};

impl TargetDensity for ReducedVEvaluator {
    fn dim(&self) -> usize {
        self.rank()
    }
    fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        ReducedVEvaluator::log_density(self, x)
    }
    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.grad(x)
    }
    fn value_and_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        ReducedVEvaluator::value_and_grad(self, x)
    }
}

/// Spread of the per-chain starting points around the prior mean of `v = log w`.
pub const INIT_SPREAD: f64 = 0.5;

/// Starting points `v⁽ᶜ⁾ = −log λ + INIT_SPREAD·ξ⁽ᶜ⁾`, one per chain.
pub fn prior_mean_starts(rates: &DVector<f64>, n_chains: usize, seed: u64) -> Vec<DVector<f64>> {
    (0..n_chains)
        .map(|c| {
            let mut rng = stream(seed, Purpose::Initialization, c as u32);
            DVector::from_fn(rates.len(), |i, _| -rates[i].ln() + INIT_SPREAD * rng.sample::<f64, _>(StandardNormal))
        })
        .collect()
}

/// Output of the CCS mixing sampler.
#[derive(Clone, Debug)]
pub struct CcsWOutput {
    /// Full mixing draws with `w_J` drawn from the prior.
    pub w: ChainSet,
    /// The MALA chains of `w_I`.
    pub w_selected: ChainSet,
}

/// Samples the CCS-approximated mixing posterior.
///
/// MALA targets the reduced density of `v_I = log w_I` with `w_J` fixed at its prior mean
/// `1/λ_J`. Each retained draw is mapped back by `w_I = exp(v_I)` and completed with a fresh
/// prior draw of `w_J`.
pub fn ccs_w_sampler(ev: &WSpaceEvaluator, split: &CoordinateSplit, cfg: &MalaConfig) -> Result<CcsWOutput> {
    let reduced = ReducedVEvaluator::new(ev, split.clone())?;
    let rates_sel = split.gather_selected(ev.rates());
    let rates_comp = split.gather_complement(ev.rates());
    let starts = prior_mean_starts(&rates_sel, cfg.n_chains, cfg.seed);
    let v_chains = mala_sample(&reduced, &starts, cfg)?;
    let mut w_sel = Vec::with_capacity(cfg.n_chains);
    let mut w_full = Vec::with_capacity(cfg.n_chains);
    for (c, chain) in v_chains.chains().iter().enumerate() {
        let ws = chain.samples.map(f64::exp);
        if ws.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::numerical("selected mixing draw is not strictly positive"));
        }
        let wc = if rates_comp.is_empty() {
            DMatrix::zeros(0, ws.ncols())
        } else {
            exponential_sample(&rates_comp, ws.ncols(), &mut stream(cfg.seed, Purpose::Exponential, c as u32))?
        };
        let mut full = DMatrix::zeros(split.dim(), ws.ncols());
        for (k, &i) in split.selected().iter().enumerate() {
            full.set_row(i, &ws.row(k));
        }
        for (k, &i) in split.complement().iter().enumerate() {
            full.set_row(i, &wc.row(k));
        }
        let mut sel_chain = chain.clone();
        sel_chain.samples = ws;
        w_sel.push(sel_chain);
        let mut full_chain = chain.clone();
        full_chain.samples = full;
        w_full.push(full_chain);
    }
    Ok(CcsWOutput { w: ChainSet::new(w_full)?, w_selected: ChainSet::new(w_sel)? })
}

/// Exact draws `x⁽ʲ⁾ ~ N(μ(w⁽ʲ⁾), Σ(w⁽ʲ⁾))` of the Laplace posterior components, one per column
/// of `w`, by randomize-then-optimize.
///
/// Draw `j` uses its own stream `(seed, Rto, offset + j)`, so results do not depend on how the
/// work is scheduled.
pub fn sample_components(
    model: &LinearGaussianModel,
    w: &DMatrix<f64>,
    seed: u64,
    offset: u32,
    solver: LsqSolver,
) -> Result<DMatrix<f64>> {
    let d = model.param_dim();
    let m = model.data_dim();
    if w.nrows() != d {
        return Err(Error::shape("mixing draws have the wrong dimension"));
    }
    let a = model.whitened_forward();
    let gram = match solver {
        LsqSolver::Cholesky => Some(model.gram()),
        LsqSolver::Cgls => None,
    };
    let cols: Vec<DVector<f64>> = (0..w.ncols())
        .into_par_iter()
        .map(|j| {
            let wj = w.column(j).into_owned();
            let mut rng = stream(seed, Purpose::Rto, offset + j as u32);
            let z1 = DVector::from_fn(m, |i, _| model.whitened_data()[i] + rng.sample::<f64, _>(StandardNormal));
            let z2 = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let prior = DiagonalCovariance::new(wj)?;
            match &gram {
                Some(g) => {
                    let mut p = g.clone();
                    for i in 0..d {
                        p[(i, i)] += 1.0 / prior.variances()[i];
                    }
                    let rhs = a.tr_mul(&z1) + z2.zip_map(prior.variances(), |g, s| g / s.sqrt());
                    Ok(SpdFactor::new(p)?.solve(&rhs))
                }
                None => Ok(Cgls::new(a, &prior)?.solve(&z1, &z2)?.x),
            }
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// Component draws for every chain of a mixing chain set; chain `c` uses stream offsets
/// starting at `c·N`.
pub fn sample_components_chains(model: &LinearGaussianModel, w: &ChainSet, seed: u64, solver: LsqSolver) -> Result<ChainSet> {
    let n = w.n_samples();
    let mut out = Vec::with_capacity(w.n_chains());
    for (c, chain) in w.chains().iter().enumerate() {
        let offset = u32::try_from(c * n).map_err(|_| Error::arg("too many draws for the stream index space"))?;
        let x = sample_components(model, &chain.samples, seed, offset, solver)?;
        out.push(Chain { seed: chain.seed, samples: x, acceptance_rate: chain.acceptance_rate, step_sizes: chain.step_sizes.clone() });
    }
    ChainSet::new(out)
}

/// Default solver: dense Cholesky up to this dimension, CGLS beyond.
pub const CHOLESKY_LIMIT: usize = 1024;

pub fn default_solver(d: usize) -> LsqSolver {
    if d <= CHOLESKY_LIMIT {
        LsqSolver::Cholesky
    } else {
        LsqSolver::Cgls
    }
}
