use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::mixing::WSpaceEvaluator;
use crate::optim::{minimize_bounded, LbfgsbOptions, Termination};
use crate::reduction::CoordinateSplit;
use crate::samplers::rng::{stream, Purpose};
use crate::samplers::{exponential_sample, truncated_mvn_sample};

/// How the precision of the truncated Gaussian surrogate was made positive definite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecisionRepair {
    None,
    /// Eigenvalues raised to `1e−10·trace/r`.
    EigenvalueFloor,
    /// Replaced by the diagonal of the negative Hessian.
    Diagonal,
}

/// Truncated-Gaussian surrogate of the mixing posterior around its nonnegative mode.
#[derive(Clone, Debug)]
pub struct MapApprox {
    /// Mode with `w_J = 0` exactly.
    pub w_map: DVector<f64>,
    /// `I = {i : w_MAP,i > threshold}`.
    pub split: CoordinateSplit,
    /// `[−∇² log π(w_MAP|y)]_{I,I}`, repaired if needed.
    pub precision: DMatrix<f64>,
    pub repair: PrecisionRepair,
    pub iterations: usize,
    pub evaluations: usize,
    pub projected_grad_norm: f64,
    pub termination: Termination,
    /// Negative log density at the mode.
    pub objective: f64,
}

impl MapApprox {
    pub fn rank(&self) -> usize {
        self.split.rank()
    }
}

/// Support threshold `max(1e−8, 1e−6·max w)`.
pub fn support_threshold(w: &DVector<f64>) -> f64 {
    1e-8f64.max(1e-6 * w.max())
}

fn repair_precision(mut p: DMatrix<f64>) -> (DMatrix<f64>, PrecisionRepair) {
    symmetrize(&mut p);
    let r = p.nrows();
    if r == 0 || p.clone().cholesky().is_some() {
        return (p, PrecisionRepair::None);
    }
    let trace = p.trace();
    if trace > 0.0 {
        let floor = 1e-10 * trace / r as f64;
        let eig = p.clone().symmetric_eigen();
        let vals = eig.eigenvalues.map(|v| v.max(floor));
        let mut q = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        symmetrize(&mut q);
        if q.clone().cholesky().is_some() {
            log::warn!("MAP precision was indefinite; eigenvalues floored at {floor:e}");
            return (q, PrecisionRepair::EigenvalueFloor);
        }
    }
    log::warn!("MAP precision is indefinite; falling back to its diagonal");
    let diag = p.diagonal().map(|v| if v > 0.0 { v } else { (trace.abs() / r as f64).max(1e-10) });
    (DMatrix::from_diagonal(&diag), PrecisionRepair::Diagonal)
}

/// Computes the nonnegative mode of the mixing posterior from `w = 0` and the Hessian-based
/// precision on its support.
pub fn map_w_approx(ev: &WSpaceEvaluator, opts: &LbfgsbOptions) -> Result<MapApprox> {
    let d = ev.dim();
    let lower = DVector::zeros(d);
    let upper = DVector::from_element(d, f64::INFINITY);
    let res = minimize_bounded(|w| ev.sparse_map_objective(w), &DVector::zeros(d), &lower, &upper, opts)?;
    let thr = support_threshold(&res.x);
    let mut w_map = res.x.clone();
    let mask: Vec<bool> = w_map.iter().map(|v| *v > thr).collect();
    for (v, keep) in w_map.iter_mut().zip(&mask) {
        if !keep {
            *v = 0.0;
        }
    }
    let split = CoordinateSplit::from_mask(&mask);
    let h = ev.hessian_block(&w_map, split.selected())?;
    let (precision, repair) = repair_precision(-h);
    Ok(MapApprox {
        w_map,
        split,
        precision,
        repair,
        iterations: res.iterations,
        evaluations: res.evaluations,
        projected_grad_norm: res.projected_grad_norm,
        termination: res.termination,
        objective: res.value,
    })
}

/// `n` draws (columns) of the MAP-approximated mixing posterior: `w_I` from the truncated
/// Gaussian surrogate and `w_J` from the exponential prior.
pub fn map_w_sampler(approx: &MapApprox, rates: &DVector<f64>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let split = &approx.split;
    if rates.len() != split.dim() {
        return Err(Error::shape("mixing rates do not match the approximation"));
    }
    let comp_rates = split.gather_complement(rates);
    let wc = if comp_rates.is_empty() {
        DMatrix::zeros(0, n)
    } else {
        exponential_sample(&comp_rates, n, &mut stream(seed, Purpose::Exponential, 0))?
    };
    let wi = if split.rank() == 0 {
        DMatrix::zeros(0, n)
    } else {
        let mean = split.gather_selected(&approx.w_map);
        truncated_mvn_sample(&mean, &approx.precision, n, &mut stream(seed, Purpose::TruncatedNormal, 0))?
    };
    let mut out = DMatrix::zeros(split.dim(), n);
    for (k, &i) in split.selected().iter().enumerate() {
        out.set_row(i, &wi.row(k));
    }
    for (k, &i) in split.complement().iter().enumerate() {
        out.set_row(i, &wc.row(k));
    }
    Ok(out)
}
