//! End-to-end sampling pipelines for each method.

use std::time::Instant;

use gmix_core::mixing::{Gram, WSpaceEvaluator};
use gmix_core::optim::LbfgsbOptions;
use gmix_core::problems::Experiment;
use gmix_core::reduction::{
    ccs_w_sampler, ccs_x_sampler, default_solver, estimate_diagnostic_w, estimate_diagnostic_x, map_w_approx,
    map_w_sampler, map_x_approx, map_x_sampler, sample_components_chains, split_by_diagnostic, split_top,
    CoordinateSplit, DiagnosticSource,
};
use gmix_core::samplers::{exponential_sample, stream, Chain, ChainSet, MalaConfig, Purpose};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{Method, RunConfig, Selection, SourceKind};
use crate::error::{stage, CliError, Result};

/// Sample sets produced by a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    WSelected,
    W,
    XSelected,
    X,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::WSelected, Role::W, Role::XSelected, Role::X];

    pub fn name(&self) -> &'static str {
        match self {
            Role::WSelected => "w_I",
            Role::W => "w",
            Role::XSelected => "x_I",
            Role::X => "x",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Role::ALL.into_iter().find(|r| r.name() == name)
    }
}

/// Everything a run persists.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: RunConfig,
    /// Chain sets in [`Role::ALL`] order.
    pub sets: Vec<(Role, ChainSet)>,
    /// Selected coordinates, for methods that reduce the dimension.
    pub selected: Option<Vec<usize>>,
    pub diagnostic: Option<DVector<f64>>,
    pub w_map: Option<DVector<f64>>,
    pub x_map: Option<DVector<f64>>,
    /// Wall-clock seconds per stage.
    pub timings: Vec<(String, f64)>,
}

impl RunOutput {
    pub fn set(&self, role: Role) -> Option<&ChainSet> {
        self.sets.iter().find(|(r, _)| *r == role).map(|(_, s)| s)
    }
}

struct Timer {
    entries: Vec<(String, f64)>,
}

impl Timer {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.entries.push((name.to_string(), start.elapsed().as_secs_f64()));
        log::info!("{name} finished in {:.2} s", start.elapsed().as_secs_f64());
        Ok(out)
    }
}

fn mala_config(cfg: &RunConfig) -> MalaConfig {
    let mut m = MalaConfig::new(cfg.n_chains, cfg.n_samples, cfg.seed);
    m.burn_in = Some(cfg.burn_in_len());
    m
}

fn diagnostic_source(kind: SourceKind) -> DiagnosticSource {
    match kind {
        SourceKind::Prior => DiagnosticSource::Prior,
        SourceKind::MapApprox => DiagnosticSource::MapApprox,
    }
}

/// `n` Laplace prior draws as `xᵢ = √wᵢ·ξᵢ` with `wᵢ ~ Exp(δᵢ²/2)`.
pub fn laplace_prior_draws(rates: &DVector<f64>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mixing = rates.map(|d| d * d / 2.0);
    let w = exponential_sample(&mixing, n, &mut stream(seed, Purpose::Prior, 0)).map_err(stage("prior sampling"))?;
    let mut rng = stream(seed, Purpose::Prior, 1);
    Ok(w.map(|v| v.sqrt() * rng.sample::<f64, _>(StandardNormal)))
}

pub fn mixing_diagnostic(ev: &WSpaceEvaluator, cfg: &RunConfig) -> Result<DVector<f64>> {
    let n = cfg.diagnostic_samples;
    let samples = match cfg.diagnostic_source {
        SourceKind::Prior => exponential_sample(ev.rates(), n, &mut stream(cfg.seed, Purpose::Prior, 0)).map_err(stage("prior sampling"))?,
        SourceKind::MapApprox => {
            let approx = map_w_approx(ev, &LbfgsbOptions::default()).map_err(stage("mixing mode"))?;
            map_w_sampler(&approx, ev.rates(), n, cfg.seed).map_err(stage("mixing surrogate sampling"))?
        }
    };
    Ok(estimate_diagnostic_w(ev, &samples, diagnostic_source(cfg.diagnostic_source)).map_err(stage("diagnostic"))?.h)
}

pub fn parameter_diagnostic(exp: &Experiment, cfg: &RunConfig) -> Result<DVector<f64>> {
    let n = cfg.diagnostic_samples;
    let samples = match cfg.diagnostic_source {
        SourceKind::Prior => laplace_prior_draws(exp.prior.rates(), n, cfg.seed)?,
        SourceKind::MapApprox => {
            let approx = map_x_approx(&exp.model, &exp.prior, &LbfgsbOptions::default()).map_err(stage("smoothed mode"))?;
            map_x_sampler(&exp.model, &approx, n, cfg.seed).map_err(stage("Gaussian surrogate sampling"))?
        }
    };
    Ok(estimate_diagnostic_x(&exp.model, &exp.prior, &samples, diagnostic_source(cfg.diagnostic_source))
        .map_err(stage("diagnostic"))?
        .h)
}

fn choose_split(h: &DVector<f64>, sel: Selection) -> Result<CoordinateSplit> {
    let d = h.len();
    let (split, _) = match sel {
        Selection::Fixed(r) => {
            if r > d {
                return Err(CliError::config(format!("r = {r} exceeds the dimension {d}")));
            }
            split_top(h, r)
        }
        Selection::Tolerance { tau, r_max } => split_by_diagnostic(h, tau, r_max),
    }
    .map_err(stage("coordinate selection"))?;
    Ok(split)
}

/// Independent draws batched into chains; batch `c` is produced by `draw(seed + c)`.
fn iid_chains(cfg: &RunConfig, mut draw: impl FnMut(u64) -> Result<DMatrix<f64>>) -> Result<ChainSet> {
    let chains = (0..cfg.n_chains as u64)
        .map(|c| Ok(Chain::new(cfg.seed + c, draw(cfg.seed + c)?)))
        .collect::<Result<Vec<_>>>()?;
    ChainSet::new(chains).map_err(stage("chain assembly"))
}

fn require_dense(ev: &WSpaceEvaluator, method: Method) -> Result<()> {
    if matches!(ev.gram(), Gram::Factored { .. }) {
        return Err(CliError::config(format!(
            "method {} needs a dense Gram matrix, which is not formed for dimension {}",
            method.name(),
            ev.dim()
        )));
    }
    Ok(())
}

/// Builds the experiment from the config and runs the selected method.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let exp = cfg.preset()?.build(cfg.seed).map_err(stage("problem construction"))?;
    run_on(cfg, &exp)
}

/// Runs the selected method on a prebuilt experiment.
pub fn run_on(cfg: &RunConfig, exp: &Experiment) -> Result<RunOutput> {
    let selection = cfg.selection()?;
    let d = exp.model.param_dim();
    let mut timer = Timer { entries: Vec::new() };
    let mut out = RunOutput {
        config: cfg.clone(),
        sets: Vec::new(),
        selected: None,
        diagnostic: None,
        w_map: None,
        x_map: None,
        timings: Vec::new(),
    };
    let solver = default_solver(d);
    let mala = mala_config(cfg);
    match cfg.method {
        Method::Reference => {
            let ev = WSpaceEvaluator::new(&exp.model, exp.prior.mixing_rates()).map_err(stage("mixing evaluator"))?;
            require_dense(&ev, cfg.method)?;
            let full = CoordinateSplit::full(d);
            let w = timer.time("mixing sampling", || Ok(ccs_w_sampler(&ev, &full, &mala).map_err(stage("mixing sampling"))?.w))?;
            let x = timer.time("parameter sampling", || {
                Ok(ccs_x_sampler(&exp.model, &exp.prior, &full, &mala).map_err(stage("parameter sampling"))?.x)
            })?;
            out.sets = vec![(Role::W, w), (Role::X, x)];
        }
        Method::CcsW => {
            let ev = WSpaceEvaluator::new(&exp.model, exp.prior.mixing_rates()).map_err(stage("mixing evaluator"))?;
            require_dense(&ev, cfg.method)?;
            let h = timer.time("diagnostic", || mixing_diagnostic(&ev, cfg))?;
            let split = choose_split(&h, selection.expect("validated"))?;
            let res = timer.time("mixing sampling", || ccs_w_sampler(&ev, &split, &mala).map_err(stage("mixing sampling")))?;
            let x = timer.time("component sampling", || {
                sample_components_chains(&exp.model, &res.w, cfg.seed, solver).map_err(stage("component sampling"))
            })?;
            let x_sel = x.select(split.selected());
            out.sets = vec![(Role::WSelected, res.w_selected), (Role::W, res.w), (Role::XSelected, x_sel), (Role::X, x)];
            out.selected = Some(split.selected().to_vec());
            out.diagnostic = Some(h);
        }
        Method::CcsX => {
            let h = timer.time("diagnostic", || parameter_diagnostic(exp, cfg))?;
            let split = choose_split(&h, selection.expect("validated"))?;
            let res = timer.time("parameter sampling", || {
                ccs_x_sampler(&exp.model, &exp.prior, &split, &mala).map_err(stage("parameter sampling"))
            })?;
            out.sets = vec![(Role::XSelected, res.x_selected), (Role::X, res.x)];
            out.selected = Some(split.selected().to_vec());
            out.diagnostic = Some(h);
        }
        Method::MapW => {
            let ev = WSpaceEvaluator::new(&exp.model, exp.prior.mixing_rates()).map_err(stage("mixing evaluator"))?;
            let approx = timer.time("mixing mode", || map_w_approx(&ev, &LbfgsbOptions::default()).map_err(stage("mixing mode")))?;
            log::info!("mixing mode has {} non-zeros", approx.rank());
            let w = timer.time("mixing sampling", || {
                iid_chains(cfg, |s| map_w_sampler(&approx, ev.rates(), cfg.n_samples, s).map_err(stage("mixing sampling")))
            })?;
            let x = timer.time("component sampling", || {
                sample_components_chains(&exp.model, &w, cfg.seed, solver).map_err(stage("component sampling"))
            })?;
            let sel = approx.split.selected().to_vec();
            let mut sets = Vec::new();
            if !sel.is_empty() {
                sets.push((Role::WSelected, w.select(&sel)));
            }
            sets.push((Role::W, w));
            if !sel.is_empty() {
                sets.push((Role::XSelected, x.select(&sel)));
            }
            sets.push((Role::X, x));
            out.sets = sets;
            out.selected = Some(sel);
            out.w_map = Some(approx.w_map);
        }
        Method::MapX => {
            let approx =
                timer.time("smoothed mode", || map_x_approx(&exp.model, &exp.prior, &LbfgsbOptions::default()).map_err(stage("smoothed mode")))?;
            let x = timer.time("parameter sampling", || {
                iid_chains(cfg, |s| map_x_sampler(&exp.model, &approx, cfg.n_samples, s).map_err(stage("parameter sampling")))
            })?;
            out.sets = vec![(Role::X, x)];
            out.x_map = Some(approx.x_map);
        }
    }
    out.timings = timer.entries;
    Ok(out)
}
