use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::samplers::diagnostics::{credible_interval, epsr, ess};

/// One Markov chain (or one batch of independent draws).
///
/// Samples are stored as columns of an `n × N` matrix, so each draw is contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub seed: u64,
    pub samples: DMatrix<f64>,
    pub acceptance_rate: f64,
    /// Step sizes used during adaptation followed by the frozen value.
    pub step_sizes: Vec<f64>,
}

impl Chain {
    pub fn new(seed: u64, samples: DMatrix<f64>) -> Self {
        Self { seed, samples, acceptance_rate: 1.0, step_sizes: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    /// Trace of coordinate `i`.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.samples.row(i).iter().copied().collect()
    }
}

/// Several chains of equal shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainSet {
    chains: Vec<Chain>,
}

impl ChainSet {
    pub fn new(chains: Vec<Chain>) -> Result<Self> {
        let Some(first) = chains.first() else {
            return Err(Error::arg("a chain set needs at least one chain"));
        };
        let shape = first.samples.shape();
        if chains.iter().any(|c| c.samples.shape() != shape) {
            return Err(Error::shape("all chains must have the same number of samples and dimension"));
        }
        let mut seeds: Vec<u64> = chains.iter().map(|c| c.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != chains.len() {
            return Err(Error::arg("chain seeds must be distinct"));
        }
        Ok(Self { chains })
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn into_chains(self) -> Vec<Chain> {
        self.chains
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_samples(&self) -> usize {
        self.chains[0].len()
    }

    pub fn dim(&self) -> usize {
        self.chains[0].dim()
    }

    /// Applies `f` to every draw, producing a chain set of dimension `out_dim`.
    pub fn map<F>(&self, out_dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    {
        let mut out = Vec::with_capacity(self.chains.len());
        for c in &self.chains {
            let mut m = DMatrix::zeros(out_dim, c.len());
            for j in 0..c.len() {
                let y = f(&c.samples.column(j).into_owned())?;
                if y.len() != out_dim {
                    return Err(Error::shape("mapped draw has the wrong dimension"));
                }
                m.set_column(j, &y);
            }
            out.push(Chain { seed: c.seed, samples: m, acceptance_rate: c.acceptance_rate, step_sizes: c.step_sizes.clone() });
        }
        Self::new(out)
    }

    /// Restriction to the listed coordinates.
    pub fn select(&self, idx: &[usize]) -> Self {
        let chains = self
            .chains
            .iter()
            .map(|c| Chain {
                seed: c.seed,
                samples: c.samples.select_rows(idx),
                acceptance_rate: c.acceptance_rate,
                step_sizes: c.step_sizes.clone(),
            })
            .collect();
        Self { chains }
    }

    /// All draws pooled into one `n × (C·N)` matrix in chain order.
    pub fn pooled(&self) -> DMatrix<f64> {
        let n = self.dim();
        let total = self.n_chains() * self.n_samples();
        let mut out = DMatrix::zeros(n, total);
        let mut k = 0;
        for c in &self.chains {
            for j in 0..c.len() {
                out.set_column(k, &c.samples.column(j));
                k += 1;
            }
        }
        out
    }

    pub fn mean(&self) -> DVector<f64> {
        let p = self.pooled();
        p.column_mean()
    }

    /// Sample variance (denominator `N − 1`) of the pooled draws.
    pub fn variance(&self) -> DVector<f64> {
        let p = self.pooled();
        let n = p.ncols() as f64;
        let mean = p.column_mean();
        DVector::from_fn(p.nrows(), |i, _| {
            p.row(i).iter().map(|v| (v - mean[i]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)
        })
    }

    /// Per-coordinate normalized effective sample size averaged across chains.
    pub fn ness(&self) -> DVector<f64> {
        let n = self.n_samples() as f64;
        DVector::from_fn(self.dim(), |i, _| {
            self.chains.iter().map(|c| ess(&c.coordinate(i)).ess / n).sum::<f64>() / self.n_chains() as f64
        })
    }

    /// Per-coordinate split-chain potential scale reduction.
    pub fn epsr(&self) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim());
        for i in 0..self.dim() {
            let traces: Vec<Vec<f64>> = self.chains.iter().map(|c| c.coordinate(i)).collect();
            let refs: Vec<&[f64]> = traces.iter().map(|t| t.as_slice()).collect();
            out[i] = epsr(&refs)?;
        }
        Ok(out)
    }

    /// Per-coordinate credible interval of the pooled draws.
    pub fn credible_intervals(&self, level: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let p = self.pooled();
        let mut lo = DVector::zeros(p.nrows());
        let mut hi = DVector::zeros(p.nrows());
        for i in 0..p.nrows() {
            let row: Vec<f64> = p.row(i).iter().copied().collect();
            let (a, b) = credible_interval(&row, level)?;
            lo[i] = a;
            hi[i] = b;
        }
        Ok((lo, hi))
    }

    pub fn acceptance_rates(&self) -> Vec<f64> {
        self.chains.iter().map(|c| c.acceptance_rate).collect()
    }
}
