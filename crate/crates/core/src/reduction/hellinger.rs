use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Sample estimate `(2/N) Σ (√ρᵢ − 1)²` with `ρᵢ = π_u(wᵢ)/π̃_u(wᵢ)` from unnormalized log
/// densities evaluated at draws `wᵢ ~ π̃`.
///
/// The log ratios are shifted by their median before exponentiation. Any fixed rescaling of `ρ`
/// yields a value of at least `2(1 − BC²) ≥ 2H²` in expectation, where `BC` is the Bhattacharyya
/// coefficient, so the estimate stays an upper bound.
pub fn hellinger_bound_estimate(log_exact: &[f64], log_approx: &[f64]) -> Result<f64> {
    if log_exact.len() != log_approx.len() {
        return Err(Error::shape("log density arrays differ in length"));
    }
    if log_exact.is_empty() {
        return Err(Error::arg("Hellinger estimate needs at least one sample"));
    }
    let ratios: Vec<f64> = log_exact.iter().zip(log_approx).map(|(a, b)| a - b).collect();
    let bad: Vec<usize> = (0..ratios.len()).filter(|&i| !ratios[i].is_finite()).collect();
    if !bad.is_empty() {
        let shown: Vec<String> = bad.iter().take(10).map(|i| i.to_string()).collect();
        return Err(Error::Numerical(format!(
            "non-finite log density ratio at {} sample(s): {}{}",
            bad.len(),
            shown.join(", "),
            if bad.len() > 10 { ", ..." } else { "" }
        )));
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    let sum: f64 = ratios.iter().map(|r| ((0.5 * (r - median)).exp() - 1.0).powi(2)).sum();
    Ok(2.0 * sum / n as f64)
}

/// [`hellinger_bound_estimate`] with the densities given as callables and draws as columns.
pub fn hellinger_bound_estimate_fn<F, G>(exact: F, approx: G, samples: &DMatrix<f64>) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
    G: Fn(&DVector<f64>) -> Result<f64>,
{
    let mut le = Vec::with_capacity(samples.ncols());
    let mut la = Vec::with_capacity(samples.ncols());
    for j in 0..samples.ncols() {
        let w = samples.column(j).into_owned();
        le.push(exact(&w)?);
        la.push(approx(&w)?);
    }
    hellinger_bound_estimate(&le, &la)
}
