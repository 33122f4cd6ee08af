use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Orthonormal multilevel Haar transform with periodic boundary.
///
/// Coefficients are laid out as `[scaling, detail (coarsest), …, detail (finest)]`. With `L` levels
/// and length `n`, the scaling block and the coarsest detail band have `n/2^L` entries each and
/// the finest band has `n/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HaarTransform {
    n: usize,
    levels: usize,
}

impl HaarTransform {
    pub fn new(n: usize, levels: usize) -> Result<Self> {
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::shape(format!("Haar transform length {n} is not a power of two")));
        }
        if levels == 0 || n < (1usize << levels) {
            return Err(Error::shape(format!("length {n} does not support {levels} Haar levels")));
        }
        Ok(Self { n, levels })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    fn check(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::shape(format!("expected a vector of length {}, got {}", self.n, v.len())));
        }
        Ok(())
    }

    /// Analysis `x = W s`.
    pub fn forward(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(s)?;
        let mut out = DVector::zeros(self.n);
        let mut approx: Vec<f64> = s.iter().copied().collect();
        let mut len = self.n;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for _ in 0..self.levels {
            let half = len / 2;
            let mut next = vec![0.0; half];
            for i in 0..half {
                let (a, b) = (approx[2 * i], approx[2 * i + 1]);
                next[i] = (a + b) * r;
                out[half + i] = (a - b) * r;
            }
            approx = next;
            len = half;
        }
        for (i, v) in approx.into_iter().enumerate() {
            out[i] = v;
        }
        Ok(out)
    }

    /// Synthesis `s = W† x`.
    pub fn inverse(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut len = self.n >> self.levels;
        let mut approx: Vec<f64> = x.rows(0, len).iter().copied().collect();
        for _ in 0..self.levels {
            let mut next = vec![0.0; 2 * len];
            for i in 0..len {
                let (a, d) = (approx[i], x[len + i]);
                next[2 * i] = (a + d) * r;
                next[2 * i + 1] = (a - d) * r;
            }
            approx = next;
            len *= 2;
        }
        Ok(DVector::from_vec(approx))
    }

    /// Level label of each coefficient: 1 for the scaling block and the coarsest band, up to
    /// `levels` for the finest band.
    pub fn coefficient_levels(&self) -> Vec<usize> {
        let mut out = vec![1; self.n];
        let mut start = self.n >> self.levels;
        for band in 1..=self.levels {
            let len = self.n >> (self.levels - band + 1);
            for v in out.iter_mut().skip(start).take(len) {
                *v = band;
            }
            start += len;
        }
        out
    }

    /// Dense `W`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            let mut e = DVector::zeros(self.n);
            e[j] = 1.0;
            m.set_column(j, &self.forward(&e).expect("length checked"));
        }
        m
    }
}

/// Level-dependent Laplace rates `δᵢ = 2^{ℓ(i)/2}` of a Besov-type prior on the signal.
pub fn besov_rates(n: usize, levels: usize) -> Result<DVector<f64>> {
    let h = HaarTransform::new(n, levels)?;
    Ok(DVector::from_iterator(n, h.coefficient_levels().into_iter().map(|l| 2f64.powf(l as f64 / 2.0))))
}
