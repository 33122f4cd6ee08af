use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mixing::WSpaceEvaluator;
use crate::model::{LaplacePrior, LinearGaussianModel};
use crate::reduction::CoordinateSplit;

/// Where the samples behind a diagnostic came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagnosticSource {
    Prior,
    MapApprox,
    Reference,
}

impl DiagnosticSource {
    pub fn label(&self) -> &'static str {
        match self {
            DiagnosticSource::Prior => "prior",
            DiagnosticSource::MapApprox => "map-approx",
            DiagnosticSource::Reference => "reference",
        }
    }
}

/// Per-coordinate sensitivity scores `h ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub h: DVector<f64>,
    pub n_samples: usize,
    pub source: DiagnosticSource,
}

/// Mean of squared per-sample gradients, scaled by `1/scale²`.
///
/// Samples are processed in parallel and summed in sample order.
fn mean_squared<F>(samples: &DMatrix<f64>, scale: &DVector<f64>, grad: F) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let n = samples.ncols();
    if n == 0 {
        return Err(Error::arg("diagnostic estimation needs at least one sample"));
    }
    let grads: Vec<DVector<f64>> = (0..n)
        .into_par_iter()
        .map(|j| grad(&samples.column(j).into_owned()))
        .collect::<Result<_>>()?;
    let mut acc = DVector::zeros(samples.nrows());
    for g in &grads {
        acc += g.component_mul(g);
    }
    let h = DVector::from_fn(acc.len(), |i, _| acc[i] / (n as f64 * scale[i] * scale[i]));
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("diagnostic has non-finite entries"));
    }
    Ok(h)
}

/// `h̃ᵢ = (1/(Nλᵢ²)) Σⱼ (∂ᵢ log π(y|w⁽ʲ⁾))²` from mixing samples stored as columns.
pub fn estimate_diagnostic_w(ev: &WSpaceEvaluator, samples: &DMatrix<f64>, source: DiagnosticSource) -> Result<Diagnostic> {
    if samples.nrows() != ev.dim() {
        return Err(Error::shape("mixing samples have the wrong dimension"));
    }
    if samples.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::support("diagnostic samples must be strictly positive"));
    }
    let h = mean_squared(samples, ev.rates(), |w| ev.grad_log_likelihood_w(w))?;
    Ok(Diagnostic { h, n_samples: samples.ncols(), source })
}

/// x-space analogue with `∇ log π(y|x) = −AᵀΣ_obs⁻¹(Ax − y)` and rates `δ`.
pub fn estimate_diagnostic_x(
    model: &LinearGaussianModel,
    prior: &LaplacePrior,
    samples: &DMatrix<f64>,
    source: DiagnosticSource,
) -> Result<Diagnostic> {
    if samples.nrows() != model.param_dim() || prior.dim() != model.param_dim() {
        return Err(Error::shape("parameter samples or prior have the wrong dimension"));
    }
    let h = mean_squared(samples, prior.rates(), |x| Ok(model.grad_log_likelihood(x)))?;
    Ok(Diagnostic { h, n_samples: samples.ncols(), source })
}

/// Error-bound curve `ε(r) = 2 Σ_{i∈J} hᵢ` for `r = 1..d` (entry `r − 1`), where `J` holds the
/// `d − r` smallest scores.
pub fn epsilon_curve(h: &DVector<f64>) -> Vec<f64> {
    let d = h.len();
    let mut sorted: Vec<f64> = h.iter().copied().collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    // prefix[k] = sum of the k smallest
    let mut prefix = vec![0.0; d + 1];
    for k in 0..d {
        prefix[k + 1] = prefix[k] + sorted[k];
    }
    (1..=d).map(|r| 2.0 * prefix[d - r]).collect()
}

/// Selects the `r = min(r(τ), r_max)` largest scores, with `r(τ)` the smallest `r` such that
/// `ε(r) ≤ τ`. Ties go to the lower index.
pub fn split_by_diagnostic(h: &DVector<f64>, tau: f64, r_max: usize) -> Result<(CoordinateSplit, Vec<f64>)> {
    let d = h.len();
    if d == 0 {
        return Err(Error::arg("empty diagnostic"));
    }
    if r_max == 0 {
        return Err(Error::arg("r_max must be at least one"));
    }
    if h.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::arg("diagnostic entries must be finite and nonnegative"));
    }
    let eps = epsilon_curve(h);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| h[b].total_cmp(&h[a]).then(a.cmp(&b)));
    let r = if h.iter().all(|v| *v == 0.0) {
        log::warn!("diagnostic is identically zero; selecting a single coordinate");
        1
    } else {
        let r_tau = (1..=d).find(|&r| eps[r - 1] <= tau).unwrap_or(d);
        r_tau.min(r_max).min(d)
    };
    let split = CoordinateSplit::new(d, &order[..r])?;
    Ok((split, eps))
}

/// Selects exactly the `r` largest scores.
pub fn split_top(h: &DVector<f64>, r: usize) -> Result<(CoordinateSplit, Vec<f64>)> {
    split_by_diagnostic(h, f64::NEG_INFINITY, r)
}
