//! Probabilistic model types and the closed-form Gaussian posterior mixture.
//!
//! For a linear forward map `A`, Gaussian noise `N(0, Σ_obs)` and a Gaussian prior mixture
//! with components `N(μ_pr(w), Σ_pr(w))`, the posterior is again a Gaussian mixture whose
//! components have precision `AᵀΣ_obs⁻¹A + Σ_pr(w)⁻¹` and whose mixing density is
//! `π(w|y) ∝ π(y|w) π(w)`. Everything here works in log space and drops normalizing
//! constants that do not depend on `w`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{check_len, log_sum_exp, SpdFactor};

/// Noise covariance of the data, stored with a whitening factorization.
#[derive(Clone, Debug)]
enum NoiseCovariance {
    Isotropic { variance: f64 },
    Dense { factor: SpdFactor },
}

/// Linear-Gaussian likelihood `y = A x + ε`, `ε ~ N(0, Σ_obs)`.
///
/// The whitened quantities `L₁ᵀA` and `L₁ᵀy` (with `Σ_obs⁻¹ = L₁L₁ᵀ`) are computed once at
/// construction; every downstream evaluator works with them.
#[derive(Clone, Debug)]
pub struct LinearGaussianModel {
    forward: DMatrix<f64>,
    data: DVector<f64>,
    noise: NoiseCovariance,
    whitened_forward: DMatrix<f64>,
    whitened_data: DVector<f64>,
}

impl LinearGaussianModel {
    /// Builds a model with a general SPD noise covariance.
    pub fn new(forward: DMatrix<f64>, noise_cov: DMatrix<f64>, data: DVector<f64>) -> Result<Self> {
        let m = forward.nrows();
        if noise_cov.nrows() != m || noise_cov.ncols() != m {
            return Err(Error::shape(format!(
                "noise covariance is {}x{}, forward map has {m} rows",
                noise_cov.nrows(),
                noise_cov.ncols()
            )));
        }
        Self::check_forward(&forward, &data)?;
        if (&noise_cov - noise_cov.transpose()).amax() > 1e-12 * noise_cov.amax().max(1.0) {
            return Err(Error::Domain("noise covariance is not symmetric".into()));
        }
        let factor = SpdFactor::new(noise_cov)
            .map_err(|e| Error::Domain(format!("noise covariance is not SPD: {e}")))?;
        let whitened_forward = factor.solve_lower_mat(&forward);
        let whitened_data = factor.solve_lower(&data);
        Ok(Self {
            forward,
            data,
            noise: NoiseCovariance::Dense { factor },
            whitened_forward,
            whitened_data,
        })
    }

    /// Builds a model with noise covariance `σ² I`.
    pub fn isotropic(forward: DMatrix<f64>, sigma: f64, data: DVector<f64>) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("noise standard deviation {sigma} must be positive")));
        }
        Self::check_forward(&forward, &data)?;
        let whitened_forward = &forward / sigma;
        let whitened_data = &data / sigma;
        Ok(Self {
            forward,
            data,
            noise: NoiseCovariance::Isotropic { variance: sigma * sigma },
            whitened_forward,
            whitened_data,
        })
    }

    fn check_forward(forward: &DMatrix<f64>, data: &DVector<f64>) -> Result<()> {
        if forward.nrows() == 0 || forward.ncols() == 0 {
            return Err(Error::shape("forward map must have m >= 1 and d >= 1"));
        }
        if data.len() != forward.nrows() {
            return Err(Error::shape(format!(
                "data has length {}, forward map has {} rows",
                data.len(),
                forward.nrows()
            )));
        }
        if forward.iter().chain(data.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("forward map or data contain non-finite values".into()));
        }
        Ok(())
    }

    /// Same operator and noise with a different data vector.
    pub fn with_data(&self, data: DVector<f64>) -> Result<Self> {
        match &self.noise {
            NoiseCovariance::Isotropic { variance } => {
                Self::isotropic(self.forward.clone(), variance.sqrt(), data)
            }
            NoiseCovariance::Dense { factor } => {
                Self::check_forward(&self.forward, &data)?;
                let whitened_data = factor.solve_lower(&data);
                Ok(Self { data, whitened_data, ..self.clone() })
            }
        }
    }

    /// Number of observations `m`.
    pub fn data_dim(&self) -> usize {
        self.forward.nrows()
    }

    /// Number of parameters `d`.
    pub fn param_dim(&self) -> usize {
        self.forward.ncols()
    }

    pub fn forward(&self) -> &DMatrix<f64> {
        &self.forward
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    /// `L₁ᵀA` with `Σ_obs⁻¹ = L₁L₁ᵀ`.
    pub fn whitened_forward(&self) -> &DMatrix<f64> {
        &self.whitened_forward
    }

    /// `L₁ᵀy`.
    pub fn whitened_data(&self) -> &DVector<f64> {
        &self.whitened_data
    }

    /// Noise standard deviation when the noise is isotropic.
    pub fn isotropic_sigma(&self) -> Option<f64> {
        match self.noise {
            NoiseCovariance::Isotropic { variance } => Some(variance.sqrt()),
            NoiseCovariance::Dense { .. } => None,
        }
    }

    pub fn noise_covariance(&self) -> DMatrix<f64> {
        match &self.noise {
            NoiseCovariance::Isotropic { variance } => {
                DMatrix::identity(self.data_dim(), self.data_dim()) * *variance
            }
            NoiseCovariance::Dense { factor } => {
                let l = factor.l();
                &l * l.transpose()
            }
        }
    }

    /// Dense `Â = AᵀΣ_obs⁻¹A`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.whitened_forward.tr_mul(&self.whitened_forward)
    }

    /// `b̂ = AᵀΣ_obs⁻¹y`.
    pub fn data_projection(&self) -> DVector<f64> {
        self.whitened_forward.tr_mul(&self.whitened_data)
    }

    /// `∇ₓ log π(y|x) = -AᵀΣ_obs⁻¹(Ax - y)`.
    pub fn grad_log_likelihood(&self, x: &DVector<f64>) -> DVector<f64> {
        let resid = &self.whitened_forward * x - &self.whitened_data;
        -self.whitened_forward.tr_mul(&resid)
    }

    /// `-½‖Ax - y‖²_{Σ_obs⁻¹}`.
    pub fn log_likelihood(&self, x: &DVector<f64>) -> f64 {
        let resid = &self.whitened_forward * x - &self.whitened_data;
        -0.5 * resid.norm_squared()
    }

    /// Stable fingerprint of the model contents, used to tag dropped constants.
    pub(crate) fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.data_dim().hash(&mut h);
        self.param_dim().hash(&mut h);
        for v in self.whitened_data.iter() {
            v.to_bits().hash(&mut h);
        }
        let stride = (self.whitened_forward.len() / 4096).max(1);
        for v in self.whitened_forward.iter().step_by(stride) {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Factorization interface for a prior component covariance `Σ_pr(w)`.
///
/// `L₂` denotes the factor of the precision, `Σ_pr⁻¹ = L₂L₂ᵀ`.
pub trait CovarianceFactor: Send + Sync {
    fn dim(&self) -> usize;
    /// `Σ v`.
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;
    /// `Σ⁻¹ v`.
    fn solve(&self, v: &DVector<f64>) -> DVector<f64>;
    fn log_det(&self) -> f64;
    /// `L₂ v`.
    fn apply_precision_sqrt(&self, v: &DVector<f64>) -> DVector<f64>;
    /// `L₂ᵀ v`.
    fn apply_precision_sqrt_t(&self, v: &DVector<f64>) -> DVector<f64>;
    /// Dense `Σ⁻¹`.
    fn precision(&self) -> DMatrix<f64>;
    /// Diagonal of `Σ⁻¹`.
    fn precision_diagonal(&self) -> DVector<f64> {
        self.precision().diagonal()
    }
    /// `L₂` is diagonal (e.g. `Λ_w^{-1/2}`).
    fn is_diagonal(&self) -> bool {
        false
    }
}

/// Diagonal covariance `Λ_w`; all operations are O(d).
#[derive(Clone, Debug)]
pub struct DiagonalCovariance {
    variances: DVector<f64>,
}

impl DiagonalCovariance {
    pub fn new(variances: DVector<f64>) -> Result<Self> {
        if let Some((i, v)) = variances.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!(
                "diagonal covariance entry {i} is {v}; all entries must be positive and finite"
            )));
        }
        Ok(Self { variances })
    }

    pub fn variances(&self) -> &DVector<f64> {
        &self.variances
    }
}

impl CovarianceFactor for DiagonalCovariance {
    fn dim(&self) -> usize {
        self.variances.len()
    }
    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        v.component_mul(&self.variances)
    }
    fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        v.component_div(&self.variances)
    }
    fn log_det(&self) -> f64 {
        self.variances.iter().map(|v| v.ln()).sum()
    }
    fn apply_precision_sqrt(&self, v: &DVector<f64>) -> DVector<f64> {
        v.zip_map(&self.variances, |a, s| a / s.sqrt())
    }
    fn apply_precision_sqrt_t(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply_precision_sqrt(v)
    }
    fn precision(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.variances.map(|s| 1.0 / s))
    }
    fn precision_diagonal(&self) -> DVector<f64> {
        self.variances.map(|s| 1.0 / s)
    }
    fn is_diagonal(&self) -> bool {
        true
    }
}

/// General dense SPD covariance held through its Cholesky factor `Σ = C Cᵀ`.
///
/// Then `Σ⁻¹ = C⁻ᵀC⁻¹`, so `L₂ = C⁻ᵀ`.
#[derive(Clone, Debug)]
pub struct DenseCovariance {
    factor: SpdFactor,
}

impl DenseCovariance {
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() {
            return Err(Error::shape("covariance must be square"));
        }
        if (&cov - cov.transpose()).amax() > 1e-10 * cov.amax().max(1.0) {
            return Err(Error::Domain("covariance is not symmetric".into()));
        }
        let factor = SpdFactor::new(cov).map_err(|e| Error::Domain(format!("covariance is not SPD: {e}")))?;
        Ok(Self { factor })
    }
}

impl CovarianceFactor for DenseCovariance {
    fn dim(&self) -> usize {
        self.factor.dim()
    }
    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let l = self.factor.l();
        &l * l.tr_mul(v)
    }
    fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(v)
    }
    fn log_det(&self) -> f64 {
        self.factor.log_det()
    }
    fn apply_precision_sqrt(&self, v: &DVector<f64>) -> DVector<f64> {
        // C⁻ᵀ v
        let mut x = v.clone();
        self.factor.l().tr_solve_lower_triangular_mut(&mut x);
        x
    }
    fn apply_precision_sqrt_t(&self, v: &DVector<f64>) -> DVector<f64> {
        self.factor.solve_lower(v)
    }
    fn precision(&self) -> DMatrix<f64> {
        self.factor.inverse()
    }
}

type MeanFn = dyn Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync;
type CovFn = dyn Fn(&DVector<f64>) -> Result<Box<dyn CovarianceFactor>> + Send + Sync;

/// Prior component map `w ↦ (μ_pr(w), Σ_pr(w))`.
#[derive(Clone)]
pub struct GaussianComponentSpec {
    dim: usize,
    mean_fn: Arc<MeanFn>,
    cov_fn: Arc<CovFn>,
}

impl std::fmt::Debug for GaussianComponentSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaussianComponentSpec").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl GaussianComponentSpec {
    pub fn new<M, C>(dim: usize, mean_fn: M, cov_fn: C) -> Self
    where
        M: Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync + 'static,
        C: Fn(&DVector<f64>) -> Result<Box<dyn CovarianceFactor>> + Send + Sync + 'static,
    {
        Self { dim, mean_fn: Arc::new(mean_fn), cov_fn: Arc::new(cov_fn) }
    }

    /// Gaussian scale mixture with `μ_pr(w) = 0` and `Σ_pr(w) = Λ_w` (the Laplace case).
    pub fn scale_mixture(dim: usize) -> Self {
        Self::new(
            dim,
            move |w: &DVector<f64>| {
                check_len("mixing variable", w, dim)?;
                Ok(DVector::zeros(dim))
            },
            move |w: &DVector<f64>| {
                check_len("mixing variable", w, dim)?;
                Ok(Box::new(DiagonalCovariance::new(w.clone())?) as Box<dyn CovarianceFactor>)
            },
        )
    }

    /// A single fixed Gaussian component (mixing variable ignored).
    pub fn fixed(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if cov.nrows() != dim {
            return Err(Error::shape("component mean and covariance sizes differ"));
        }
        let factor = Arc::new(DenseCovariance::new(cov)?);
        Ok(Self::new(
            dim,
            move |_| Ok(mean.clone()),
            move |_| Ok(Box::new(factor.as_ref().clone()) as Box<dyn CovarianceFactor>),
        ))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        let mu = (self.mean_fn)(w)?;
        check_len("component mean", &mu, self.dim)?;
        Ok(mu)
    }

    pub fn covariance(&self, w: &DVector<f64>) -> Result<Box<dyn CovarianceFactor>> {
        let c = (self.cov_fn)(w)?;
        if c.dim() != self.dim {
            return Err(Error::shape(format!(
                "component covariance has dimension {}, expected {}",
                c.dim(),
                self.dim
            )));
        }
        Ok(c)
    }
}

/// Prior density over the mixing variable.
#[derive(Clone, Debug, PartialEq)]
pub enum MixingDensity {
    /// `π(w) ∝ exp(-Σ λᵢ wᵢ)` on the positive orthant.
    Exponential { rates: DVector<f64> },
    /// Per-coordinate `π(wᵢ) ∝ wᵢ^{-α-1} exp(-β / wᵢ)`.
    InverseGamma { shape: f64, rate: f64 },
    /// Finite mixture: `w` is a component index held in a length-1 vector.
    FiniteWeights { weights: DVector<f64> },
}

impl MixingDensity {
    pub fn exponential(rates: DVector<f64>) -> Result<Self> {
        if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Domain("exponential mixing rates must be strictly positive".into()));
        }
        Ok(MixingDensity::Exponential { rates })
    }

    pub fn inverse_gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0) {
            return Err(Error::Domain("inverse-gamma shape and rate must be positive".into()));
        }
        Ok(MixingDensity::InverseGamma { shape, rate })
    }

    /// Inverse-gamma mixing of a Student's t with `ν` degrees of freedom (`α = β = ν/2`).
    pub fn student_t(dof: f64) -> Result<Self> {
        Self::inverse_gamma(dof / 2.0, dof / 2.0)
    }

    pub fn finite(weights: DVector<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Domain("finite mixture weights must be nonnegative".into()));
        }
        if (weights.sum() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("finite mixture weights sum to {}, not 1", weights.sum())));
        }
        Ok(MixingDensity::FiniteWeights { weights })
    }

    /// Unnormalized log density.
    pub fn log_density(&self, w: &DVector<f64>) -> Result<f64> {
        match self {
            MixingDensity::Exponential { rates } => {
                check_len("mixing variable", w, rates.len())?;
                if let Some(v) = w.iter().find(|v| !(**v > 0.0)) {
                    return Err(Error::support(format!("exponential mixing needs w > 0, got {v}")));
                }
                Ok(-rates.dot(w))
            }
            MixingDensity::InverseGamma { shape, rate } => {
                if let Some(v) = w.iter().find(|v| !(**v > 0.0)) {
                    return Err(Error::support(format!("inverse-gamma mixing needs w > 0, got {v}")));
                }
                Ok(w.iter().map(|wi| -(shape + 1.0) * wi.ln() - rate / wi).sum())
            }
            MixingDensity::FiniteWeights { weights } => {
                let idx = Self::component_index(w, weights.len())?;
                Ok(weights[idx].ln())
            }
        }
    }

    fn component_index(w: &DVector<f64>, n: usize) -> Result<usize> {
        if w.len() != 1 || w[0] < 0.0 || w[0].fract() != 0.0 || w[0] as usize >= n {
            return Err(Error::support(format!("finite mixture index must be an integer in [0, {n})")));
        }
        Ok(w[0] as usize)
    }
}

/// Product-form Laplace prior `π(x) ∝ exp(-Σ δᵢ|xᵢ|)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacePrior {
    rates: DVector<f64>,
}

impl LaplacePrior {
    pub fn new(rates: DVector<f64>) -> Result<Self> {
        if rates.is_empty() || rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Domain("Laplace rates must be strictly positive".into()));
        }
        Ok(Self { rates })
    }

    pub fn uniform(dim: usize, rate: f64) -> Result<Self> {
        Self::new(DVector::from_element(dim, rate))
    }

    pub fn dim(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &DVector<f64> {
        &self.rates
    }

    /// Exponential mixing rates `λᵢ = δᵢ²/2`.
    pub fn mixing_rates(&self) -> DVector<f64> {
        self.rates.map(|d| d * d / 2.0)
    }

    pub fn mixing_density(&self) -> MixingDensity {
        MixingDensity::Exponential { rates: self.mixing_rates() }
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        -self.rates.iter().zip(x.iter()).map(|(d, v)| d * v.abs()).sum::<f64>()
    }
}

/// Conditional posterior component `N(μ(w,y), Σ(w))`.
pub struct PosteriorComponent<'a> {
    model: &'a LinearGaussianModel,
    prior_mean: DVector<f64>,
    prior_cov: Box<dyn CovarianceFactor>,
}

impl<'a> PosteriorComponent<'a> {
    pub fn model(&self) -> &LinearGaussianModel {
        self.model
    }

    pub fn prior_mean(&self) -> &DVector<f64> {
        &self.prior_mean
    }

    pub fn prior_covariance(&self) -> &dyn CovarianceFactor {
        self.prior_cov.as_ref()
    }

    /// Dense `Σ(w)⁻¹ = AᵀΣ_obs⁻¹A + Σ_pr(w)⁻¹`.
    pub fn precision(&self) -> DMatrix<f64> {
        self.model.gram() + self.prior_cov.precision()
    }

    /// Right-hand side `AᵀΣ_obs⁻¹y + Σ_pr(w)⁻¹μ_pr(w)` of the mean equation.
    pub fn mean_rhs(&self) -> DVector<f64> {
        self.model.data_projection() + self.prior_cov.solve(&self.prior_mean)
    }

    pub fn factor(&self) -> Result<SpdFactor> {
        SpdFactor::new(self.precision())
    }

    pub fn mean(&self) -> Result<DVector<f64>> {
        Ok(self.factor()?.solve(&self.mean_rhs()))
    }

    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        Ok(self.factor()?.inverse())
    }
}

/// Assembles the conditional posterior component at `w`.
pub fn posterior_component<'a>(
    model: &'a LinearGaussianModel,
    spec: &GaussianComponentSpec,
    w: &DVector<f64>,
) -> Result<PosteriorComponent<'a>> {
    if spec.dim() != model.param_dim() {
        return Err(Error::shape(format!(
            "component dimension {} does not match parameter dimension {}",
            spec.dim(),
            model.param_dim()
        )));
    }
    let prior_mean = spec.mean(w)?;
    let prior_cov = spec.covariance(w)?;
    Ok(PosteriorComponent { model, prior_mean, prior_cov })
}

/// `log π(y|w)` up to a constant fixed per model instance.
///
/// Evaluates `½log det Σ(w) − ½log det Σ_pr(w) + ½‖μ(w,y)‖²_{Σ(w)⁻¹} − ½‖μ_pr(w)‖²_{Σ_pr(w)⁻¹}`
/// with determinants taken from factorizations.
pub fn log_marginal_y_given_w(
    model: &LinearGaussianModel,
    spec: &GaussianComponentSpec,
    w: &DVector<f64>,
) -> Result<f64> {
    let comp = posterior_component(model, spec, w)?;
    let factor = comp.factor()?;
    let rhs = comp.mean_rhs();
    // ‖μ‖²_{Σ⁻¹} = rhsᵀ Σ rhs
    let quad_post = factor.inv_quad(&rhs);
    let prior_prec_mean = comp.prior_cov.solve(&comp.prior_mean);
    let quad_prior = comp.prior_mean.dot(&prior_prec_mean);
    let value = -0.5 * factor.log_det() - 0.5 * comp.prior_cov.log_det() + 0.5 * quad_post - 0.5 * quad_prior;
    if !value.is_finite() {
        return Err(Error::numerical("log marginal likelihood is not finite"));
    }
    Ok(value)
}

/// Unnormalized `log π(w|y) = log π(y|w) + log π(w)`.
pub fn log_mixing_posterior(
    model: &LinearGaussianModel,
    spec: &GaussianComponentSpec,
    mixing: &MixingDensity,
    w: &DVector<f64>,
) -> Result<f64> {
    let prior = mixing.log_density(w)?;
    Ok(log_marginal_y_given_w(model, spec, w)? + prior)
}

/// Posterior component weights `p(i|y) ∝ π(y|i) pᵢ` of a finite Gaussian mixture prior.
pub fn gmm_posterior_weights(
    model: &LinearGaussianModel,
    means: &[DVector<f64>],
    covs: &[DMatrix<f64>],
    weights: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = means.len();
    if n == 0 || covs.len() != n || weights.len() != n {
        return Err(Error::shape(format!(
            "need matching nonempty component lists, got {} means, {} covariances, {} weights",
            n,
            covs.len(),
            weights.len()
        )));
    }
    MixingDensity::finite(weights.clone())?;
    let mut logs = Vec::with_capacity(n);
    for ((mu, cov), p) in means.iter().zip(covs).zip(weights.iter()) {
        if *p == 0.0 {
            logs.push(f64::NEG_INFINITY);
            continue;
        }
        let spec = GaussianComponentSpec::fixed(mu.clone(), cov.clone())?;
        let lml = log_marginal_y_given_w(model, &spec, &DVector::zeros(1))?;
        logs.push(lml + p.ln());
    }
    let norm = log_sum_exp(&logs);
    if !norm.is_finite() {
        return Err(Error::numerical("all posterior component weights vanished"));
    }
    let out = DVector::from_iterator(n, logs.iter().map(|l| (l - norm).exp()));
    if out.iter().all(|v| *v == 0.0) {
        return Err(Error::numerical("all posterior component weights vanished"));
    }
    Ok(out)
}
