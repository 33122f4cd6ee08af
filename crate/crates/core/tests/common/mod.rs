#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use gmix_core::model::LinearGaussianModel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

pub fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn uniform_vector(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

/// Random model with isotropic noise.
pub fn random_model(rng: &mut ChaCha8Rng, m: usize, d: usize) -> LinearGaussianModel {
    let a = normal_matrix(rng, m, d);
    let y = normal_vector(rng, m);
    let sigma = rng.random_range(0.3..1.5);
    LinearGaussianModel::isotropic(a, sigma, y).unwrap()
}

/// Random SPD matrix `QQᵀ + shift·I`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let q = normal_matrix(rng, n, n);
    &q * q.transpose() + DMatrix::identity(n, n) * shift
}

/// Log density of `N(mean, cov)` at `x` through an explicit inverse and determinant.
pub fn mvn_logpdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = x.len() as f64;
    let inv = cov.clone().try_inverse().unwrap();
    let r = x - mean;
    let det = cov.determinant();
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + det.ln() + (r.transpose() * inv * &r)[(0, 0)])
}

/// Central finite-difference gradient with per-coordinate step `h(x, i)`.
pub fn fd_grad<F, H>(f: F, x: &DVector<f64>, h: H) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
    H: Fn(&DVector<f64>, usize) -> f64,
{
    DVector::from_fn(x.len(), |i, _| {
        let hi = h(x, i);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += hi;
        xm[i] -= hi;
        (f(&xp) - f(&xm)) / (2.0 * hi)
    })
}

/// Largest per-coordinate relative error `|a − b| / max(|a|, |b|)`.
pub fn max_rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let s = x.abs().max(y.abs());
            if s == 0.0 {
                0.0
            } else {
                (x - y).abs() / s
            }
        })
        .fold(0.0, f64::max)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Integral over `[a, b]` split into `pieces` panels, each integrated adaptively.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces).map(|k| integrate(f, a + k as f64 * h, a + (k + 1) as f64 * h, tol / pieces as f64)).sum()
}

/// Two-sample-free Kolmogorov–Smirnov distance between draws and a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Midpoint-rule quadrature of an unnormalized 2D density on a box.
pub struct Grid2 {
    pub lo: [f64; 2],
    pub h: [f64; 2],
    pub n: usize,
    /// Normalized cell masses, index `i·n + j` for cell `(i, j)` along coordinates `(0, 1)`.
    pub mass: Vec<f64>,
}

impl Grid2 {
    pub fn new<F: Fn(f64, f64) -> f64>(lo: [f64; 2], hi: [f64; 2], n: usize, log_density: F) -> Self {
        let h = [(hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64];
        let mut logs = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                logs.push(log_density(lo[0] + (i as f64 + 0.5) * h[0], lo[1] + (j as f64 + 0.5) * h[1]));
            }
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut mass: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|m| *m /= total);
        Self { lo, h, n, mass }
    }

    pub fn point(&self, cell: usize) -> [f64; 2] {
        let (i, j) = (cell / self.n, cell % self.n);
        [self.lo[0] + (i as f64 + 0.5) * self.h[0], self.lo[1] + (j as f64 + 0.5) * self.h[1]]
    }

    pub fn expect<F: Fn([f64; 2]) -> f64>(&self, f: F) -> f64 {
        self.mass.iter().enumerate().map(|(c, m)| m * f(self.point(c))).sum()
    }

    /// Mass on the boundary cells, a check that the box captures the density.
    pub fn edge_mass(&self) -> f64 {
        let n = self.n;
        (0..n * n).filter(|c| c / n == 0 || c / n == n - 1 || c % n == 0 || c % n == n - 1).map(|c| self.mass[c]).sum()
    }

    /// Marginal CDF of coordinate `k`, linear within cells.
    pub fn marginal_cdf(&self, k: usize) -> impl Fn(f64) -> f64 + '_ {
        let n = self.n;
        let mut bins = vec![0.0; n];
        for (c, m) in self.mass.iter().enumerate() {
            bins[if k == 0 { c / n } else { c % n }] += m;
        }
        let mut cum = vec![0.0; n + 1];
        for b in 0..n {
            cum[b + 1] = cum[b] + bins[b];
        }
        move |t: f64| {
            let u = (t - self.lo[k]) / self.h[k];
            if u <= 0.0 {
                0.0
            } else if u >= n as f64 {
                1.0
            } else {
                let b = u.floor() as usize;
                cum[b] + (u - b as f64) * bins[b]
            }
        }
    }

    /// Exact draws from the piecewise-constant density.
    pub fn sample(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
        let mut cum = Vec::with_capacity(self.mass.len());
        let mut acc = 0.0;
        for m in &self.mass {
            acc += m;
            cum.push(acc);
        }
        (0..count)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let c = cum.partition_point(|v| *v < u).min(cum.len() - 1);
                let p = self.point(c);
                [
                    p[0] + (rng.random::<f64>() - 0.5) * self.h[0],
                    p[1] + (rng.random::<f64>() - 0.5) * self.h[1],
                ]
            })
            .collect()
    }
}
