//! Synthetic test problems: wavelet-domain deblurring and STORM super-resolution.

mod blur;
mod haar;
mod storm;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{LaplacePrior, LinearGaussianModel};
use crate::samplers::rng::{stream, Purpose};

pub use blur::BlurOperator;
pub use haar::{besov_rates, HaarTransform};
pub use storm::{lognormal_from_mode_sd, StormOperator};

/// Ground truth, data and prior parameters of a synthetic experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentData {
    /// Truth in the parameter domain (wavelet coefficients or fine-grid intensities).
    pub truth: DVector<f64>,
    /// Truth in signal space, when it differs from the parameter domain.
    pub signal: Option<DVector<f64>>,
    pub data: DVector<f64>,
    pub sigma_obs: f64,
    /// Laplace rates `δ`.
    pub rates: DVector<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub name: String,
    pub model: LinearGaussianModel,
    pub prior: LaplacePrior,
    pub data: ExperimentData,
}

/// Jump positions (for length 1024) and heights of the piecewise-constant deblurring truth.
///
/// The heights sum to zero so the periodic extension has no jump at the wrap point. At length
/// 1024 with 10 levels the Haar coefficients of this signal have exactly 60 non-zeros. Large
/// jumps sit on multiples of 8; the small ones sit one sample off, so their finest-scale
/// coefficients lie below what the data can resolve at noise level 0.03.
pub const DEBLUR_JUMPS: [(usize, f64); 10] = [
    (40, -0.8),
    (161, 0.31),
    (280, 1.1),
    (367, 0.31),
    (465, -0.2),
    (505, 0.25),
    (632, -0.6),
    (697, 0.35),
    (897, 0.22),
    (920, -0.94),
];

#[derive(Clone, Debug, PartialEq)]
pub struct DeblurConfig {
    pub n: usize,
    pub levels: usize,
    pub blur_width: usize,
    pub blur_sd: f64,
    pub sigma_obs: f64,
}

impl DeblurConfig {
    /// Length 1024, 10 Haar levels, 27-tap blur with standard deviation 3, noise 0.03.
    pub fn full() -> Self {
        Self { n: 1024, levels: 10, blur_width: 27, blur_sd: 3.0, sigma_obs: 0.03 }
    }

    /// Length 256 with 8 levels; the blur is kept in fine-grid units.
    pub fn small() -> Self {
        Self { n: 256, ..Self::full() }.with_levels(8)
    }

    fn with_levels(mut self, levels: usize) -> Self {
        self.levels = levels;
        self
    }
}

/// Piecewise-constant truth of length `n`, with jump positions scaled from length 1024.
pub fn deblur_signal(n: usize) -> DVector<f64> {
    let mut s = DVector::zeros(n);
    for &(p, h) in &DEBLUR_JUMPS {
        let start = p * n / 1024;
        for v in s.iter_mut().skip(start) {
            *v += h;
        }
    }
    s
}

/// Blur composed with wavelet synthesis, `A = G W†`, as a matrix-free map.
#[derive(Clone, Debug)]
pub struct DeblurOperator {
    pub blur: BlurOperator,
    pub haar: HaarTransform,
}

impl DeblurOperator {
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.blur.apply(&self.haar.inverse(x)?)
    }

    /// `Aᵀu = W Gᵀ u`.
    pub fn apply_adjoint(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.haar.forward(&self.blur.apply_adjoint(u)?)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.haar.len();
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            a.set_column(j, &self.apply(&e).expect("length checked"));
        }
        a
    }
}

fn gaussian_noise(n: usize, sigma: f64, seed: u64) -> DVector<f64> {
    let mut rng = stream(seed, Purpose::Data, 0);
    DVector::from_fn(n, |_, _| sigma * rng.sample::<f64, _>(StandardNormal))
}

pub fn deblur_operator(cfg: &DeblurConfig) -> Result<DeblurOperator> {
    Ok(DeblurOperator {
        blur: BlurOperator::gaussian(cfg.n, cfg.blur_width, cfg.blur_sd)?,
        haar: HaarTransform::new(cfg.n, cfg.levels)?,
    })
}

/// Deblurring posterior in the Haar coefficient domain with Besov-type rates.
pub fn build_deblurring(cfg: &DeblurConfig, seed: u64) -> Result<Experiment> {
    let op = deblur_operator(cfg)?;
    let signal = deblur_signal(cfg.n);
    let truth = op.haar.forward(&signal)?;
    let data = op.blur.apply(&signal)? + gaussian_noise(cfg.n, cfg.sigma_obs, seed);
    let rates = besov_rates(cfg.n, cfg.levels)?;
    let model = LinearGaussianModel::isotropic(op.matrix(), cfg.sigma_obs, data.clone())?;
    Ok(Experiment {
        name: format!("deblur1d-{}", cfg.n),
        model,
        prior: LaplacePrior::new(rates.clone())?,
        data: ExperimentData { truth, signal: Some(signal), data, sigma_obs: cfg.sigma_obs, rates, seed },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StormConfig {
    pub coarse: usize,
    pub k: usize,
    pub psf_sd: f64,
    pub n_molecules: usize,
    pub intensity_mode: f64,
    pub intensity_sd: f64,
    pub sigma_obs: f64,
    pub delta: f64,
}

impl StormConfig {
    /// 32 × 32 measurements, oversampling 4, 50 molecules.
    pub fn full() -> Self {
        Self {
            coarse: 32,
            k: 4,
            psf_sd: 2.0,
            n_molecules: 50,
            intensity_mode: 3000.0,
            intensity_sd: 1700.0,
            sigma_obs: 30.0,
            delta: 1.275,
        }
    }

    /// 16 × 16 measurements, oversampling 2. The molecule density per coarse pixel and the PSF
    /// width in coarse pixels match the full problem.
    pub fn small() -> Self {
        Self { coarse: 16, k: 2, n_molecules: 12, psf_sd: 1.0, ..Self::full() }
    }
}

/// Molecule positions (fine-pixel indices, ascending) and intensities.
pub fn storm_truth(cfg: &StormConfig, seed: u64) -> Result<DVector<f64>> {
    let d = cfg.coarse * cfg.coarse * cfg.k * cfg.k;
    if cfg.n_molecules > d {
        return Err(Error::arg("more molecules than fine pixels"));
    }
    let (mu, sigma) = lognormal_from_mode_sd(cfg.intensity_mode, cfg.intensity_sd)?;
    let dist = LogNormal::new(mu, sigma).map_err(|e| Error::arg(e.to_string()))?;
    let mut rng = stream(seed, Purpose::Problem, 0);
    let mut pos = sample(&mut rng, d, cfg.n_molecules).into_vec();
    pos.sort_unstable();
    let mut x = DVector::zeros(d);
    for p in pos {
        x[p] = dist.sample(&mut rng);
    }
    Ok(x)
}

/// STORM posterior on the fine grid with a global Laplace rate.
pub fn build_storm(cfg: &StormConfig, seed: u64) -> Result<Experiment> {
    let op = StormOperator::new(cfg.coarse, cfg.k, cfg.psf_sd)?;
    let truth = storm_truth(cfg, seed)?;
    let data = op.apply(&truth)? + gaussian_noise(op.data_dim(), cfg.sigma_obs, seed);
    let rates = DVector::from_element(op.param_dim(), cfg.delta);
    let model = LinearGaussianModel::isotropic(op.matrix(), cfg.sigma_obs, data.clone())?;
    Ok(Experiment {
        name: format!("storm2d-{}x{}-k{}", cfg.coarse, cfg.coarse, cfg.k),
        model,
        prior: LaplacePrior::new(rates.clone())?,
        data: ExperimentData { truth, signal: None, data, sigma_obs: cfg.sigma_obs, rates, seed },
    })
}

/// Two-dimensional problem small enough for quadrature checks.
pub fn build_toy(seed: u64) -> Result<Experiment> {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.3, 0.8]);
    let truth = DVector::from_vec(vec![1.5, 0.0]);
    let sigma = 0.5;
    let data = &a * &truth + gaussian_noise(2, sigma, seed);
    let rates = DVector::from_vec(vec![1.0, 2.0]);
    let model = LinearGaussianModel::isotropic(a, sigma, data.clone())?;
    Ok(Experiment {
        name: "toy".into(),
        model,
        prior: LaplacePrior::new(rates.clone())?,
        data: ExperimentData { truth, signal: None, data, sigma_obs: sigma, rates, seed },
    })
}

/// Named problem configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Deblur,
    DeblurSmall,
    Storm,
    StormSmall,
    Toy,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "deblur" | "deblur1d" => Ok(Preset::Deblur),
            "deblur-small" => Ok(Preset::DeblurSmall),
            "storm" | "storm2d" => Ok(Preset::Storm),
            "storm-small" => Ok(Preset::StormSmall),
            "toy" => Ok(Preset::Toy),
            other => Err(Error::arg(format!("unknown preset `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Deblur => "deblur",
            Preset::DeblurSmall => "deblur-small",
            Preset::Storm => "storm",
            Preset::StormSmall => "storm-small",
            Preset::Toy => "toy",
        }
    }

    pub fn build(&self, seed: u64) -> Result<Experiment> {
        match self {
            Preset::Deblur => build_deblurring(&DeblurConfig::full(), seed),
            Preset::DeblurSmall => build_deblurring(&DeblurConfig::small(), seed),
            Preset::Storm => build_storm(&StormConfig::full(), seed),
            Preset::StormSmall => build_storm(&StormConfig::small(), seed),
            Preset::Toy => build_toy(seed),
        }
    }
}
