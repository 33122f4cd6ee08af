//! Exact sampling of the Gaussian posterior component by randomize-then-optimize.
//!
//! A draw from `N(μ(w,y), Σ(w))` is the solution of
//! `min_a ‖M a − z‖²` with `M = [L₁ᵀA; L₂ᵀ]` and `z = [L₁ᵀy + ζ; L₂ᵀμ_pr + γ]`,
//! `ζ ~ N(0, I_m)`, `γ ~ N(0, I_d)`, where `Σ_obs⁻¹ = L₁L₁ᵀ` and `Σ_pr⁻¹ = L₂L₂ᵀ`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::model::{CovarianceFactor, GaussianComponentSpec, LinearGaussianModel};

/// Relative residual tolerance of the least-squares solve.
pub const CGLS_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct CglsOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// `‖Mᵀ(z − Mx)‖ / ‖Mᵀz‖` in the column-scaled variables.
    pub relative_residual: f64,
}

/// Conjugate gradients on the normal equations of `min ‖M x − z‖` with `M = [A; Pᵀ]`.
///
/// The columns are scaled by `D = diag(‖M_{:,j}‖)` (right Jacobi preconditioning), which leaves
/// the minimizer unchanged and removes the bad scaling caused by very small prior variances.
pub struct Cgls<'a> {
    a: &'a DMatrix<f64>,
    prior: &'a dyn CovarianceFactor,
    scale: DVector<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a> Cgls<'a> {
    pub fn new(a: &'a DMatrix<f64>, prior: &'a dyn CovarianceFactor) -> Result<Self> {
        let d = a.ncols();
        if prior.dim() != d {
            return Err(Error::shape("prior factor dimension does not match the forward map"));
        }
        let col_sq = DVector::from_fn(d, |j, _| a.column(j).norm_squared());
        let prec_diag = prior.precision_diagonal();
        let scale = (col_sq + prec_diag).map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
        Ok(Self { a, prior, scale, tol: CGLS_TOL, max_iter: 10 * d })
    }

    /// `[q1; q2] = M (D⁻¹ u)`.
    fn apply_into(&self, u: &DVector<f64>, x: &mut DVector<f64>, q1: &mut DVector<f64>, q2: &mut DVector<f64>) {
        x.copy_from(u);
        x.component_div_assign(&self.scale);
        q1.gemv(1.0, self.a, x, 0.0);
        q2.copy_from(&self.prior.apply_precision_sqrt_t(x));
    }

    /// `out = D⁻¹ Mᵀ [r1; r2]`.
    fn apply_t_into(&self, r1: &DVector<f64>, r2: &DVector<f64>, out: &mut DVector<f64>) {
        out.copy_from(&self.prior.apply_precision_sqrt(r2));
        out.gemv_tr(1.0, self.a, r1, 1.0);
        out.component_div_assign(&self.scale);
    }

    pub fn solve(&self, z1: &DVector<f64>, z2: &DVector<f64>) -> Result<CglsOutcome> {
        let (m, d) = self.a.shape();
        let mut u = DVector::zeros(d);
        let mut r1 = z1.clone();
        let mut r2 = z2.clone();
        let mut s = DVector::zeros(d);
        let mut x = DVector::zeros(d);
        let mut q1 = DVector::zeros(m);
        let mut q2 = DVector::zeros(d);
        self.apply_t_into(&r1, &r2, &mut s);
        let s0 = s.norm();
        if s0 == 0.0 {
            return Ok(CglsOutcome { x: u, iterations: 0, relative_residual: 0.0 });
        }
        let mut p = s.clone();
        let mut gamma = s.norm_squared();
        let mut rel = 1.0;
        for it in 1..=self.max_iter {
            self.apply_into(&p, &mut x, &mut q1, &mut q2);
            let qq = q1.norm_squared() + q2.norm_squared();
            if qq == 0.0 {
                break;
            }
            let alpha = gamma / qq;
            u.axpy(alpha, &p, 1.0);
            r1.axpy(-alpha, &q1, 1.0);
            r2.axpy(-alpha, &q2, 1.0);
            self.apply_t_into(&r1, &r2, &mut s);
            let gamma_new = s.norm_squared();
            rel = gamma_new.sqrt() / s0;
            if rel <= self.tol {
                u.component_div_assign(&self.scale);
                return Ok(CglsOutcome { x: u, iterations: it, relative_residual: rel });
            }
            let beta = gamma_new / gamma;
            gamma = gamma_new;
            p.axpy(1.0, &s, beta);
        }
        Err(Error::Numerical(format!(
            "CGLS did not reach relative residual {:e} within {} iterations (final residual {rel:e})",
            self.tol, self.max_iter
        )))
    }
}

/// Solver for the randomized least-squares problem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LsqSolver {
    /// Jacobi-scaled CGLS; never forms `MᵀM`.
    #[default]
    Cgls,
    /// Cholesky factorization of the normal equations, formed once and reused for every draw.
    Cholesky,
}

/// One exact draw from the posterior component at mixing value `w`.
pub fn linear_rto_sample<R: Rng + ?Sized>(
    model: &LinearGaussianModel,
    spec: &GaussianComponentSpec,
    w: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if spec.dim() != model.param_dim() {
        return Err(Error::shape("component dimension does not match the model"));
    }
    let mean = spec.mean(w)?;
    let cov = spec.covariance(w)?;
    rto_draw(model, cov.as_ref(), &mean, rng)
}

/// RTO draw for an explicit prior factor and mean.
pub fn rto_draw<R: Rng + ?Sized>(
    model: &LinearGaussianModel,
    prior: &dyn CovarianceFactor,
    prior_mean: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    Ok(rto_draws(model, prior, prior_mean, 1, rng)?.column(0).into_owned())
}

/// `n` independent RTO draws as columns, sharing one solver setup.
pub fn rto_draws<R: Rng + ?Sized>(
    model: &LinearGaussianModel,
    prior: &dyn CovarianceFactor,
    prior_mean: &DVector<f64>,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    rto_draws_with(model, prior, prior_mean, n, LsqSolver::Cgls, rng)
}

/// [`rto_draws`] with an explicit least-squares solver.
pub fn rto_draws_with<R: Rng + ?Sized>(
    model: &LinearGaussianModel,
    prior: &dyn CovarianceFactor,
    prior_mean: &DVector<f64>,
    n: usize,
    solver: LsqSolver,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let m = model.data_dim();
    let d = model.param_dim();
    if prior_mean.len() != d {
        return Err(Error::shape("prior mean dimension does not match the model"));
    }
    if prior.dim() != d {
        return Err(Error::shape("prior factor dimension does not match the forward map"));
    }
    let a = model.whitened_forward();
    let z2_base = prior.apply_precision_sqrt_t(prior_mean);
    let mut out = DMatrix::zeros(d, n);
    let draw = |rng: &mut R| {
        let z1 = DVector::from_fn(m, |i, _| model.whitened_data()[i] + rng.sample::<f64, _>(StandardNormal));
        let z2 = DVector::from_fn(d, |i, _| z2_base[i] + rng.sample::<f64, _>(StandardNormal));
        (z1, z2)
    };
    match solver {
        LsqSolver::Cgls => {
            let cgls = Cgls::new(a, prior)?;
            for s in 0..n {
                let (z1, z2) = draw(rng);
                out.set_column(s, &cgls.solve(&z1, &z2)?.x);
            }
        }
        LsqSolver::Cholesky => {
            let factor = SpdFactor::new(a.tr_mul(a) + prior.precision())?;
            for s in 0..n {
                let (z1, z2) = draw(rng);
                let rhs = a.tr_mul(&z1) + prior.apply_precision_sqrt(&z2);
                out.set_column(s, &factor.solve(&rhs));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DiagonalCovariance;

    #[test]
    fn cgls_solves_least_squares() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.2]);
        let prior = DiagonalCovariance::new(DVector::from_vec(vec![0.5, 2.0])).unwrap();
        let z1 = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        let z2 = DVector::from_vec(vec![0.3, 0.1]);
        let x = Cgls::new(&a, &prior).unwrap().solve(&z1, &z2).unwrap().x;
        let l2t = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5f64.powf(-0.5), 2.0f64.powf(-0.5)]));
        let mut m = DMatrix::zeros(5, 2);
        m.view_mut((0, 0), (3, 2)).copy_from(&a);
        m.view_mut((3, 0), (2, 2)).copy_from(&l2t);
        let mut z = DVector::zeros(5);
        z.rows_mut(0, 3).copy_from(&z1);
        z.rows_mut(3, 2).copy_from(&z2);
        let want = (m.transpose() * &m).lu().solve(&(m.transpose() * z)).unwrap();
        assert!((x - want).amax() < 1e-10);
    }
}
