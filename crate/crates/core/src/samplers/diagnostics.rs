//! Effective sample size, potential scale reduction and credible intervals.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EssResult {
    pub ess: f64,
    /// The chain had zero variance; `ess` is then the chain length.
    pub degenerate: bool,
}

/// Autocorrelations `ρ₀..ρ_{N−1}` of a trace (biased autocovariance, FFT based).
pub fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        return vec![0.0; n];
    }
    buf.iter().take(n).map(|c| c.re / c0).collect()
}

/// Effective sample size by Geyer's initial positive sequence.
///
/// Consecutive autocorrelation pairs `Γₖ = ρ_{2k} + ρ_{2k+1}` are summed while positive and made
/// monotone non-increasing; the integrated autocorrelation time is `τ = −1 + 2ΣΓₖ`.
pub fn ess(x: &[f64]) -> EssResult {
    let n = x.len();
    if n < 2 {
        return EssResult { ess: n as f64, degenerate: true };
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    if !(var > 0.0) || !var.is_finite() {
        return EssResult { ess: n as f64, degenerate: true };
    }
    let rho = autocorrelation(x);
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let mut gamma = rho[2 * k] + rho[2 * k + 1];
        if gamma <= 0.0 {
            break;
        }
        if gamma > prev {
            gamma = prev;
        }
        sum += gamma;
        prev = gamma;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / (n as f64).log10().max(1.0));
    EssResult { ess: n as f64 / tau, degenerate: false }
}

/// Split-chain potential scale reduction of one scalar quantity.
pub fn epsr(chains: &[&[f64]]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::arg("potential scale reduction needs at least two chains"));
    }
    let n = chains[0].len();
    if n < 4 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::arg("chains must share a length of at least four draws"));
    }
    let half = n / 2;
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        halves.push(&c[..half]);
        halves.push(&c[n - half..]);
    }
    let m = halves.len() as f64;
    let len = half as f64;
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / len).collect();
    let vars: Vec<f64> = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (len - 1.0))
        .collect();
    let grand = means.iter().sum::<f64>() / m;
    let between = len * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (m - 1.0);
    let within = vars.iter().sum::<f64>() / m;
    if within == 0.0 {
        return Ok(if between == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (len - 1.0) / len * within + between / len;
    Ok((var_plus / within).sqrt())
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Central credible interval at the given level from empirical quantiles.
pub fn credible_interval(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::arg("credible interval of an empty sample"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::arg(format!("credible level {level} must lie in (0, 1)")));
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let tail = (1.0 - level) / 2.0;
    Ok((quantile(&s, tail), quantile(&s, 1.0 - tail)))
}
