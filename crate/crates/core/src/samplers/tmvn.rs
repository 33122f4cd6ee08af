//! Exact sampling of a multivariate normal restricted to a box by minimax exponential tilting.
//!
//! The covariance is factored with a variable reordering that puts the most constrained
//! coordinates first. Draws come from a sequential truncated-normal proposal whose means are
//! shifted by a tilting vector `μ*`. The pair `(x*, μ*)` solves the saddle-point system of the
//! log-likelihood-ratio bound `ψ(x, μ)` and is found by Newton's method. Proposals are accepted
//! when `−log U > ψ* − log ρ(Z)`, which yields exact draws.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;

/// Largest dimension accepted.
pub const MAX_DIM: usize = 500;

/// Smallest estimated acceptance probability before giving up.
pub const MIN_ACCEPTANCE: f64 = 1e-12;

/// `exp(x²) erfc(x)` for `x ≥ 0`, accurate in the far tail.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 25.0 {
        return (x * x).exp() * erfc(x);
    }
    // asymptotic series 1/(x√π) Σ (−1)ᵏ (2k−1)!! / (2x²)ᵏ
    let inv = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..6 {
        term *= -((2 * k - 1) as f64) * inv;
        sum += term;
    }
    sum / (x * PI.sqrt())
}

/// `log Q(x)`, the log upper-tail probability of the standard normal.
pub fn ln_upper_tail(x: f64) -> f64 {
    if x >= 0.0 {
        -0.5 * x * x - 2f64.ln() + erfcx(x / SQRT_2).ln()
    } else {
        (0.5 * erfc(x / SQRT_2)).ln()
    }
}

/// `log P(a < Z < b)` for a standard normal `Z`.
pub fn ln_normal_prob(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        let pa = ln_upper_tail(a);
        let pb = ln_upper_tail(b);
        pa + (-(pb - pa).exp()).ln_1p()
    } else if b < 0.0 {
        let pa = ln_upper_tail(-a);
        let pb = ln_upper_tail(-b);
        pb + (-(pa - pb).exp()).ln_1p()
    } else {
        let pa = 0.5 * erfc(-a / SQRT_2);
        let pb = 0.5 * erfc(b / SQRT_2);
        (-pa - pb).ln_1p()
    }
}

/// Standard normal truncated to `[l, u]` with `l > 0.66`, by Rayleigh rejection.
fn normal_tail<R: Rng + ?Sized>(l: f64, u: f64, rng: &mut R) -> f64 {
    let c = 0.5 * l * l;
    let f = (c - 0.5 * u * u).exp_m1();
    loop {
        let x = c - (1.0 + rng.random::<f64>() * f).ln();
        let v: f64 = rng.random();
        if v * v * x <= c {
            return (2.0 * x).sqrt();
        }
    }
}

/// Standard normal truncated to `[l, u]` with both limits inside `[−0.66, 0.66]`-ish.
fn normal_central<R: Rng + ?Sized>(l: f64, u: f64, rng: &mut R) -> f64 {
    if (u - l).abs() > 2.0 {
        loop {
            let x: f64 = rng.sample(StandardNormal);
            if x >= l && x <= u {
                return x;
            }
        }
    }
    let pl = 0.5 * erfc(l / SQRT_2);
    let pu = 0.5 * erfc(u / SQRT_2);
    let v: f64 = rng.random();
    SQRT_2 * erfc_inv(2.0 * (pl - (pl - pu) * v))
}

/// One draw of a standard normal truncated to `[l, u]`.
pub fn truncated_standard_normal<R: Rng + ?Sized>(l: f64, u: f64, rng: &mut R) -> f64 {
    const A: f64 = 0.66;
    if l > A {
        normal_tail(l, u, rng)
    } else if u < -A {
        -normal_tail(-u, -l, rng)
    } else {
        normal_central(l, u, rng)
    }
}

/// Prepared sampler for `N(μ, Σ)` restricted to `l ≤ x ≤ u`.
#[derive(Clone, Debug)]
pub struct TruncatedMvn {
    mean: DVector<f64>,
    /// Permuted Cholesky factor of `Σ`.
    l_full: DMatrix<f64>,
    /// Row-normalized factor minus the identity (strictly lower).
    l_unit: DMatrix<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
    perm: Vec<usize>,
    x_star: DVector<f64>,
    mu_star: DVector<f64>,
    psi_star: f64,
}

/// Permuted Cholesky factorization with the Genz–Bretz ordering.
fn cholperm(
    cov: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>, Vec<usize>)> {
    let d = cov.nrows();
    let mut sig = cov.clone();
    let mut l = DMatrix::zeros(d, d);
    let mut z = DVector::zeros(d);
    let mut lo = lower.clone();
    let mut up = upper.clone();
    let mut perm: Vec<usize> = (0..d).collect();
    for j in 0..d {
        let mut best = (f64::INFINITY, j);
        for i in j..d {
            let mut s = sig[(i, i)];
            let mut cz = 0.0;
            for k in 0..j {
                s -= l[(i, k)] * l[(i, k)];
                cz += l[(i, k)] * z[k];
            }
            let s = s.max(f64::EPSILON).sqrt();
            let pr = ln_normal_prob((lo[i] - cz) / s, (up[i] - cz) / s);
            if pr < best.0 {
                best = (pr, i);
            }
        }
        let k = best.1;
        if k != j {
            sig.swap_rows(j, k);
            sig.swap_columns(j, k);
            l.swap_rows(j, k);
            lo.swap_rows(j, k);
            up.swap_rows(j, k);
            perm.swap(j, k);
        }
        let mut s = sig[(j, j)];
        for k in 0..j {
            s -= l[(j, k)] * l[(j, k)];
        }
        if s < -0.01 {
            return Err(Error::numerical("covariance is not positive definite"));
        }
        let ljj = s.max(f64::EPSILON).sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..d {
            let mut v = sig[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
        let mut cz = 0.0;
        for k in 0..j {
            cz += l[(j, k)] * z[k];
        }
        let tl = (lo[j] - cz) / ljj;
        let tu = (up[j] - cz) / ljj;
        let w = ln_normal_prob(tl, tu);
        z[j] = ((-0.5 * tl * tl - w).exp() - (-0.5 * tu * tu - w).exp()) / (2.0 * PI).sqrt();
    }
    Ok((l, lo, up, perm))
}

impl TruncatedMvn {
    /// `N(mean, precision⁻¹)` restricted to the positive orthant.
    pub fn positive_orthant(mean: &DVector<f64>, precision: &DMatrix<f64>) -> Result<Self> {
        let r = mean.len();
        if r == 0 || precision.nrows() != r || precision.ncols() != r {
            return Err(Error::shape("mean and precision sizes differ or are empty"));
        }
        let cov = SpdFactor::new(precision.clone())?.inverse();
        Self::new(mean, &cov, &DVector::zeros(r), &DVector::from_element(r, f64::INFINITY))
    }

    /// `N(mean, cov)` restricted to `lower ≤ x ≤ upper`.
    pub fn new(mean: &DVector<f64>, cov: &DMatrix<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> Result<Self> {
        let d = mean.len();
        if d > MAX_DIM {
            return Err(Error::arg(format!("truncated normal sampling supports at most {MAX_DIM} dimensions, got {d}")));
        }
        if cov.nrows() != d || lower.len() != d || upper.len() != d {
            return Err(Error::shape("truncated normal arguments have inconsistent sizes"));
        }
        if (0..d).any(|i| !(lower[i] < upper[i])) {
            return Err(Error::arg("truncation limits must satisfy lower < upper"));
        }
        let lo = lower - mean;
        let up = upper - mean;
        let (l_full, lo, up, perm) = cholperm(cov, &lo, &up)?;
        let diag = l_full.diagonal();
        if diag.iter().any(|v| *v < 1e-10) {
            log::warn!("truncated normal covariance is close to singular");
        }
        let mut l_unit = l_full.clone();
        for i in 0..d {
            l_unit.row_mut(i).unscale_mut(diag[i]);
            l_unit[(i, i)] = 0.0;
        }
        let lo = lo.component_div(&diag);
        let up = up.component_div(&diag);
        let mut out = Self {
            mean: mean.clone(),
            l_full,
            l_unit,
            lower: lo,
            upper: up,
            perm,
            x_star: DVector::zeros(d),
            mu_star: DVector::zeros(d),
            psi_star: 0.0,
        };
        out.solve_tilting()?;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Gradient of `ψ` in `(x, μ)` and its Jacobian, with the last components pinned at zero.
    fn grad_psi(&self, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.dim();
        let k = d - 1;
        let mut x = DVector::zeros(d);
        let mut mu = DVector::zeros(d);
        x.rows_mut(0, k).copy_from(&y.rows(0, k));
        mu.rows_mut(0, k).copy_from(&y.rows(k, k));
        let c = &self.l_unit * &x;
        let mut lt = &self.lower - &mu - &c;
        let mut ut = &self.upper - &mu - &c;
        let norm = (2.0 * PI).sqrt();
        let mut pl = DVector::zeros(d);
        let mut pu = DVector::zeros(d);
        for i in 0..d {
            let w = ln_normal_prob(lt[i], ut[i]);
            pl[i] = (-0.5 * lt[i] * lt[i] - w).exp() / norm;
            pu[i] = (-0.5 * ut[i] * ut[i] - w).exp() / norm;
        }
        let p = &pl - &pu;
        let lp = self.l_unit.tr_mul(&p);
        let mut grad = DVector::zeros(2 * k);
        for i in 0..k {
            grad[i] = -mu[i] + lp[i];
            grad[k + i] = mu[i] - x[i] + p[i];
        }
        for i in 0..d {
            if lt[i].is_infinite() {
                lt[i] = 0.0;
            }
            if ut[i].is_infinite() {
                ut[i] = 0.0;
            }
        }
        let dp = DVector::from_fn(d, |i, _| -p[i] * p[i] + lt[i] * pl[i] - ut[i] * pu[i]);
        let mut dl = self.l_unit.clone();
        for i in 0..d {
            dl.row_mut(i).scale_mut(dp[i]);
        }
        let xx = self.l_unit.tr_mul(&dl);
        let mut jac = DMatrix::zeros(2 * k, 2 * k);
        for a in 0..k {
            for b in 0..k {
                jac[(a, b)] = xx[(a, b)];
                // mx = −I + DL; top-right block is mxᵀ, bottom-left is mx
                let mx_ab = dl[(a, b)] - if a == b { 1.0 } else { 0.0 };
                jac[(k + a, b)] = mx_ab;
                jac[(b, k + a)] = mx_ab;
            }
            jac[(k + a, k + a)] = 1.0 + dp[a];
        }
        (grad, jac)
    }

    fn psi(&self, x: &DVector<f64>, mu: &DVector<f64>) -> f64 {
        let c = &self.l_unit * x;
        let mut acc = 0.0;
        for i in 0..self.dim() {
            let lt = self.lower[i] - mu[i] - c[i];
            let ut = self.upper[i] - mu[i] - c[i];
            acc += ln_normal_prob(lt, ut) + 0.5 * mu[i] * mu[i] - x[i] * mu[i];
        }
        acc
    }

    fn solve_tilting(&mut self) -> Result<()> {
        let d = self.dim();
        if d > 1 {
            let k = d - 1;
            let mut y = DVector::zeros(2 * k);
            let (mut g, mut j) = self.grad_psi(&y);
            let mut err = g.norm_squared();
            let mut iter = 0;
            while err > 1e-10 {
                let step = j.clone().lu().solve(&g).ok_or_else(|| Error::numerical("singular tilting Jacobian"))?;
                // damped Newton on the residual norm
                let mut t = 1.0;
                loop {
                    let cand = &y - &step * t;
                    let (gc, jc) = self.grad_psi(&cand);
                    let ec = gc.norm_squared();
                    if ec.is_finite() && (ec < err || t < 1e-4) {
                        y = cand;
                        g = gc;
                        j = jc;
                        err = ec;
                        break;
                    }
                    t *= 0.5;
                }
                iter += 1;
                if iter > 200 || !err.is_finite() {
                    return Err(Error::numerical(format!("tilting parameter search did not converge (residual {err:e})")));
                }
            }
            self.x_star.rows_mut(0, k).copy_from(&y.rows(0, k));
            self.mu_star.rows_mut(0, k).copy_from(&y.rows(k, k));
        }
        self.psi_star = self.psi(&self.x_star, &self.mu_star);
        Ok(())
    }

    /// Proposal draws in standardized coordinates with their log likelihood ratios.
    fn propose<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (DMatrix<f64>, Vec<f64>) {
        let d = self.dim();
        let mut z = DMatrix::zeros(d, n);
        let mut logp = vec![0.0; n];
        for s in 0..n {
            for k in 0..d {
                let mut col = 0.0;
                for j in 0..k {
                    col += self.l_unit[(k, j)] * z[(j, s)];
                }
                let mu = self.mu_star[k];
                let tl = self.lower[k] - mu - col;
                let tu = self.upper[k] - mu - col;
                let v = mu + truncated_standard_normal(tl, tu, rng);
                z[(k, s)] = v;
                logp[s] += ln_normal_prob(tl, tu) + 0.5 * mu * mu - mu * v;
            }
        }
        (z, logp)
    }

    /// `n` independent exact draws as columns of a `d × n` matrix.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mut out = DMatrix::zeros(d, n);
        let mut filled = 0;
        let mut rounds = 0usize;
        let mut proposed = 0usize;
        let mut accepted_total = 0usize;
        let batch = n.max(1);
        while filled < n {
            let (z, logp) = self.propose(batch, rng);
            if rounds == 0 {
                let est = logp.iter().map(|lp| (lp - self.psi_star).exp()).sum::<f64>() / batch as f64;
                if est < MIN_ACCEPTANCE {
                    return Err(Error::Feasibility(format!(
                        "estimated acceptance probability {est:e} is below {MIN_ACCEPTANCE:e}; use a Gaussian \
                         approximation of the truncated density or a Gibbs sampler instead"
                    )));
                }
            }
            let x = &self.l_full * z;
            for s in 0..batch {
                if filled == n {
                    break;
                }
                let e: f64 = rng.sample(Open01);
                if -e.ln() > self.psi_star - logp[s] {
                    let mut draw = DVector::zeros(d);
                    for i in 0..d {
                        draw[self.perm[i]] = x[(i, s)];
                    }
                    draw += &self.mean;
                    out.set_column(filled, &draw);
                    filled += 1;
                    accepted_total += 1;
                }
            }
            proposed += batch;
            rounds += 1;
            if rounds > 10_000 {
                return Err(Error::Feasibility(format!(
                    "accepted {accepted_total} of {proposed} proposals; acceptance probability too small"
                )));
            }
        }
        Ok(out)
    }
}

/// Draws `n` samples of `N(mean, precision⁻¹)` restricted to the open positive orthant.
pub fn truncated_mvn_sample<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    precision: &DMatrix<f64>,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let sampler = TruncatedMvn::positive_orthant(mean, precision)?;
    let mut out = sampler.sample(n, rng)?;
    // draws landing exactly on the boundary through rounding are redrawn
    for s in 0..n {
        while out.column(s).iter().any(|v| *v <= 0.0) {
            let redraw = sampler.sample(1, rng)?;
            out.set_column(s, &redraw.column(0));
        }
    }
    Ok(out)
}
