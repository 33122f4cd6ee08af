//! Samplers and chain diagnostics.

pub mod chain;
pub mod diagnostics;
pub mod mala;
pub mod rng;
pub mod rto;
pub mod tmvn;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Open01;

use crate::error::{Error, Result};

pub use chain::{Chain, ChainSet};
pub use diagnostics::{autocorrelation, credible_interval, epsr, ess, EssResult};
pub use mala::{mala_chain, mala_sample, FnTarget, MalaConfig, StepSizePolicy, TargetDensity};
pub use rng::{stream, Purpose, StreamRng};
pub use rto::{linear_rto_sample, rto_draw, rto_draws, rto_draws_with, Cgls, LsqSolver, CglsOutcome};
pub use tmvn::{truncated_mvn_sample, truncated_standard_normal, TruncatedMvn};

/// `n` independent draws of `wᵢ ~ Exp(λᵢ)` as columns of a `len(λ) × n` matrix.
pub fn exponential_sample<R: Rng + ?Sized>(rates: &DVector<f64>, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::Domain("exponential rates must be positive and finite".into()));
    }
    let mut out = DMatrix::zeros(rates.len(), n);
    for s in 0..n {
        for i in 0..rates.len() {
            let u: f64 = rng.sample(Open01);
            out[(i, s)] = -u.ln() / rates[i];
        }
    }
    Ok(out)
}
