use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Fine-grid Gaussian point-spread function followed by `k × k` pixel-area integration.
///
/// Images are stored row-major: fine pixel `(r, c)` has index `r·(s·k) + c` and coarse pixel
/// `(R, C)` has index `R·s + C`. Light leaving the field of view is lost.
#[derive(Clone, Debug)]
pub struct StormOperator {
    coarse: usize,
    k: usize,
    /// Non-zeros per fine pixel: `(coarse index, weight)`.
    cols: Vec<Vec<(usize, f64)>>,
}

impl StormOperator {
    /// `coarse × coarse` measurement grid, oversampling `k`, PSF standard deviation `psf_sd` in
    /// fine pixels, truncated to a square window of half-width `⌈4·psf_sd⌉`. The PSF samples
    /// have unit peak, so a molecule of intensity `x` delivers about `2π·psf_sd²·x` in total.
    pub fn new(coarse: usize, k: usize, psf_sd: f64) -> Result<Self> {
        if coarse == 0 || k == 0 {
            return Err(Error::arg("STORM grid sizes must be positive"));
        }
        if !(psf_sd > 0.0) {
            return Err(Error::arg("PSF standard deviation must be positive"));
        }
        let fine = coarse * k;
        let h = (4.0 * psf_sd).ceil() as i64;
        let mut taps = Vec::new();
        for dr in -h..=h {
            for dc in -h..=h {
                let g = (-((dr * dr + dc * dc) as f64) / (2.0 * psf_sd * psf_sd)).exp();
                taps.push((dr, dc, g));
            }
        }
        let mut cols = Vec::with_capacity(fine * fine);
        for r in 0..fine as i64 {
            for c in 0..fine as i64 {
                let mut entries: Vec<(usize, f64)> = Vec::new();
                for &(dr, dc, g) in &taps {
                    let (pr, pc) = (r + dr, c + dc);
                    if pr < 0 || pc < 0 || pr >= fine as i64 || pc >= fine as i64 {
                        continue;
                    }
                    let idx = (pr as usize / k) * coarse + pc as usize / k;
                    match entries.iter_mut().find(|e| e.0 == idx) {
                        Some(e) => e.1 += g,
                        None => entries.push((idx, g)),
                    }
                }
                entries.sort_by_key(|e| e.0);
                cols.push(entries);
            }
        }
        Ok(Self { coarse, k, cols })
    }

    /// Number of measurements `m = s²`.
    pub fn data_dim(&self) -> usize {
        self.coarse * self.coarse
    }

    /// Number of unknowns `d = m·k²`.
    pub fn param_dim(&self) -> usize {
        self.cols.len()
    }

    pub fn oversampling(&self) -> usize {
        self.k
    }

    pub fn coarse_size(&self) -> usize {
        self.coarse
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.param_dim() {
            return Err(Error::shape("STORM operator input has the wrong length"));
        }
        let mut y = DVector::zeros(self.data_dim());
        for (f, col) in self.cols.iter().enumerate() {
            for &(i, g) in col {
                y[i] += g * x[f];
            }
        }
        Ok(y)
    }

    pub fn apply_adjoint(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        if u.len() != self.data_dim() {
            return Err(Error::shape("STORM adjoint input has the wrong length"));
        }
        Ok(DVector::from_fn(self.param_dim(), |f, _| self.cols[f].iter().map(|&(i, g)| g * u[i]).sum()))
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.data_dim(), self.param_dim());
        for (f, col) in self.cols.iter().enumerate() {
            for &(i, g) in col {
                a[(i, f)] = g;
            }
        }
        a
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }
}

/// Log-normal `(μ, σ)` whose density has the given mode and standard deviation.
///
/// With `s = σ²`, the mode `exp(μ − s)` fixes `μ = ln(mode) + s` and the standard deviation
/// condition becomes `(e^s − 1) e^{3s} = (sd/mode)²`, which is increasing in `s`.
pub fn lognormal_from_mode_sd(mode: f64, sd: f64) -> Result<(f64, f64)> {
    if !(mode > 0.0 && sd > 0.0) {
        return Err(Error::arg("log-normal mode and standard deviation must be positive"));
    }
    let target = (sd / mode).powi(2);
    let f = |s: f64| (s.exp() - 1.0) * (3.0 * s).exp() - target;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok((mode.ln() + s, s.sqrt()))
}
