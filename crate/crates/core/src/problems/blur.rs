use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Periodic convolution with a sampled, normalized Gaussian kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct BlurOperator {
    n: usize,
    /// Taps for offsets `−h..=h`.
    kernel: Vec<f64>,
}

impl BlurOperator {
    /// Kernel of `width` taps (odd) sampled from a Gaussian with standard deviation `sd`.
    pub fn gaussian(n: usize, width: usize, sd: f64) -> Result<Self> {
        if width % 2 == 0 || width > n {
            return Err(Error::arg(format!("blur width {width} must be odd and at most the signal length {n}")));
        }
        if !(sd > 0.0) {
            return Err(Error::arg("blur standard deviation must be positive"));
        }
        let h = (width / 2) as i64;
        let mut kernel: Vec<f64> = (-h..=h).map(|k| (-(k * k) as f64 / (2.0 * sd * sd)).exp()).collect();
        let total: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|v| *v /= total);
        Ok(Self { n, kernel })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    fn conv(&self, s: &DVector<f64>, flip: bool) -> Result<DVector<f64>> {
        if s.len() != self.n {
            return Err(Error::shape(format!("blur expects length {}, got {}", self.n, s.len())));
        }
        let n = self.n as i64;
        let h = (self.kernel.len() / 2) as i64;
        Ok(DVector::from_fn(self.n, |i, _| {
            let mut acc = 0.0;
            for (t, g) in self.kernel.iter().enumerate() {
                let k = t as i64 - h;
                let j = if flip { i as i64 + k } else { i as i64 - k };
                acc += g * s[j.rem_euclid(n) as usize];
            }
            acc
        }))
    }

    /// `G s`.
    pub fn apply(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        self.conv(s, false)
    }

    /// `Gᵀ u`.
    pub fn apply_adjoint(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.conv(u, true)
    }

    /// Dense `G`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n as i64;
        let h = (self.kernel.len() / 2) as i64;
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (t, g) in self.kernel.iter().enumerate() {
                let j = (i as i64 - (t as i64 - h)).rem_euclid(n) as usize;
                m[(i, j)] += g;
            }
        }
        m
    }
}
