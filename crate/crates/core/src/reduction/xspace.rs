//! Baselines that reduce or approximate the parameter posterior directly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{DiagonalCovariance, LaplacePrior, LinearGaussianModel};
use crate::optim::{minimize, LbfgsbOptions};
use crate::reduction::ccs::default_solver;
use crate::reduction::CoordinateSplit;
use crate::samplers::mala::{mala_sample, MalaConfig, TargetDensity};
use crate::samplers::rng::{stream, Purpose};
use crate::samplers::rto::rto_draws_with;
use crate::samplers::{Chain, ChainSet};

/// `log π(x_I|y)` with `x_J = 0`: `−½x_IᵀÂ_IIx_I + b̂_Iᵀx_I − Σ_{i∈I} δᵢ|xᵢ|`.
#[derive(Clone, Debug)]
pub struct ReducedXTarget {
    gram: DMatrix<f64>,
    b_hat: DVector<f64>,
    rates: DVector<f64>,
}

impl ReducedXTarget {
    pub fn new(model: &LinearGaussianModel, prior: &LaplacePrior, split: &CoordinateSplit) -> Result<Self> {
        if split.dim() != model.param_dim() || prior.dim() != model.param_dim() {
            return Err(Error::shape("split or prior does not match the model"));
        }
        if split.rank() == 0 {
            return Err(Error::arg("reduced target needs at least one selected coordinate"));
        }
        let a_sel = model.whitened_forward().select_columns(split.selected());
        let gram = a_sel.tr_mul(&a_sel);
        let b_hat = a_sel.tr_mul(model.whitened_data());
        Ok(Self { gram, b_hat, rates: split.gather_selected(prior.rates()) })
    }

    /// Mode of the smoothed target with `|x|` replaced by `√(x² + γ)`, `γ = δ²/4`.
    pub fn smoothed_mode(&self, opts: &LbfgsbOptions) -> Result<(DVector<f64>, DVector<f64>)> {
        let gamma = self.rates.map(|d| d * d / 4.0);
        let res = minimize(|x| Ok(smoothed_objective(&self.gram, &self.b_hat, &self.rates, &gamma, x)), &DVector::zeros(self.b_hat.len()), opts)?;
        let z = curvature_weights(&res.x, &self.rates, &gamma);
        Ok((res.x, z))
    }
}

impl TargetDensity for ReducedXTarget {
    fn dim(&self) -> usize {
        self.b_hat.len()
    }
    fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.value_and_grad(x)?.0)
    }
    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.value_and_grad(x)?.1)
    }
    fn value_and_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let ax = &self.gram * x;
        let value = -0.5 * x.dot(&ax) + self.b_hat.dot(x) - self.rates.dot(&x.abs());
        let sign = x.map(|v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 });
        let grad = &self.b_hat - ax - self.rates.component_mul(&sign);
        Ok((value, grad))
    }
}

fn smoothed_objective(
    gram: &DMatrix<f64>,
    b_hat: &DVector<f64>,
    rates: &DVector<f64>,
    gamma: &DVector<f64>,
    x: &DVector<f64>,
) -> (f64, DVector<f64>) {
    let ax = gram * x;
    let root = DVector::from_fn(x.len(), |i, _| (x[i] * x[i] + gamma[i]).sqrt());
    let value = 0.5 * x.dot(&ax) - b_hat.dot(x) + rates.dot(&root);
    let grad = ax - b_hat + DVector::from_fn(x.len(), |i, _| rates[i] * x[i] / root[i]);
    (value, grad)
}

/// `zᵢ = δᵢγᵢ/√(xᵢ² + γᵢ)`.
fn curvature_weights(x: &DVector<f64>, rates: &DVector<f64>, gamma: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| rates[i] * gamma[i] / (x[i] * x[i] + gamma[i]).sqrt())
}

/// Output of the CCS(X) sampler.
#[derive(Clone, Debug)]
pub struct CcsXOutput {
    /// Full parameter draws with `x_J = 0`.
    pub x: ChainSet,
    pub x_selected: ChainSet,
}

/// MALA on the reduced parameter posterior `π(x_I|y)` with `x_J = 0`.
///
/// Chains start at the smoothed mode perturbed by `0.1/√(Â_ii + zᵢ)·ξ`.
pub fn ccs_x_sampler(model: &LinearGaussianModel, prior: &LaplacePrior, split: &CoordinateSplit, cfg: &MalaConfig) -> Result<CcsXOutput> {
    let target = ReducedXTarget::new(model, prior, split)?;
    let (mode, z) = target.smoothed_mode(&LbfgsbOptions::default())?;
    let scale = DVector::from_fn(mode.len(), |i, _| 0.1 / (target.gram[(i, i)] + z[i]).sqrt());
    let starts: Vec<DVector<f64>> = (0..cfg.n_chains)
        .map(|c| {
            let mut rng = stream(cfg.seed, Purpose::Initialization, c as u32);
            DVector::from_fn(mode.len(), |i, _| mode[i] + scale[i] * rng.sample::<f64, _>(StandardNormal))
        })
        .collect();
    let sel = mala_sample(&target, &starts, cfg)?;
    let full = sel
        .chains()
        .iter()
        .map(|c| {
            let mut samples = DMatrix::zeros(split.dim(), c.len());
            for (k, &i) in split.selected().iter().enumerate() {
                samples.set_row(i, &c.samples.row(k));
            }
            Chain { seed: c.seed, samples, acceptance_rate: c.acceptance_rate, step_sizes: c.step_sizes.clone() }
        })
        .collect();
    Ok(CcsXOutput { x: ChainSet::new(full)?, x_selected: sel })
}

/// Gaussian approximation `N(x_MAP, H̃⁻¹)` with `H̃ = Â + Λ_z`.
#[derive(Clone, Debug)]
pub struct MapXApprox {
    pub x_map: DVector<f64>,
    /// Smoothing parameters `γᵢ`.
    pub gamma: DVector<f64>,
    /// Diagonal prior curvature `zᵢ = δᵢγᵢ/√(x_MAP,i² + γᵢ)`.
    pub z: DVector<f64>,
    pub iterations: usize,
    pub projected_grad_norm: f64,
}

impl MapXApprox {
    /// Dense `H̃`.
    pub fn precision(&self, model: &LinearGaussianModel) -> DMatrix<f64> {
        let mut h = model.gram();
        for i in 0..h.nrows() {
            h[(i, i)] += self.z[i];
        }
        h
    }
}

/// Mode of the smoothed posterior `½‖Ax − y‖²_{Σ_obs⁻¹} + Σ δᵢ√(xᵢ² + γᵢ)` with `γᵢ = δᵢ²/4`.
pub fn map_x_approx(model: &LinearGaussianModel, prior: &LaplacePrior, opts: &LbfgsbOptions) -> Result<MapXApprox> {
    let d = model.param_dim();
    if prior.dim() != d {
        return Err(Error::shape("prior does not match the model"));
    }
    let rates = prior.rates();
    let gamma = rates.map(|v| v * v / 4.0);
    let a = model.whitened_forward();
    let y = model.whitened_data();
    let res = minimize(
        |x| {
            let resid = a * x - y;
            let root = DVector::from_fn(d, |i, _| (x[i] * x[i] + gamma[i]).sqrt());
            let value = 0.5 * resid.norm_squared() + rates.dot(&root);
            let grad = a.tr_mul(&resid) + DVector::from_fn(d, |i, _| rates[i] * x[i] / root[i]);
            Ok((value, grad))
        },
        &DVector::zeros(d),
        opts,
    )?;
    let z = curvature_weights(&res.x, rates, &gamma);
    Ok(MapXApprox { x_map: res.x, gamma, z, iterations: res.iterations, projected_grad_norm: res.projected_grad_norm })
}

/// `n` draws (columns) of `N(x_MAP, H̃⁻¹)` by randomize-then-optimize with prior precision `Λ_z`
/// and prior mean `x_MAP + Λ_z⁻¹(Âx_MAP − b̂)`, which places the posterior mean at `x_MAP`.
pub fn map_x_sampler(model: &LinearGaussianModel, approx: &MapXApprox, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let x = &approx.x_map;
    let a = model.whitened_forward();
    let grad_data = a.tr_mul(&(a * x - model.whitened_data()));
    let prior_mean = x + grad_data.component_div(&approx.z);
    let prior = DiagonalCovariance::new(approx.z.map(|v| 1.0 / v))?;
    rto_draws_with(model, &prior, &prior_mean, n, default_solver(model.param_dim()), &mut stream(seed, Purpose::Rto, 0))
}
