//! Acceptance checks. Each criterion runs in turn and prints one PASS or FAIL line; the process
//! exits with status 1 when any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use common::*;
use gmix_cli::pipeline::{mixing_diagnostic, parameter_diagnostic};
use gmix_cli::{Method, RunConfig, SourceKind};
use gmix_core::container::Container;
use gmix_core::mixing::{ReducedVEvaluator, VSpaceEvaluator, WSpaceEvaluator};
use gmix_core::model::{
    log_marginal_y_given_w, CovarianceFactor, DenseCovariance, DiagonalCovariance, GaussianComponentSpec, LinearGaussianModel,
};
use gmix_core::optim::LbfgsbOptions;
use gmix_core::problems::{build_storm, build_toy, deblur_operator, DeblurConfig, Experiment, HaarTransform, Preset, StormConfig, StormOperator};
use gmix_core::reduction::ccs::prior_mean_starts;
use gmix_core::reduction::{
    ccs_w_sampler, ccs_x_sampler, epsilon_curve, estimate_diagnostic_w, hellinger_bound_estimate_fn, map_w_approx, map_w_sampler,
    sample_components_chains, split_top, CoordinateSplit, DiagnosticSource,
};
use gmix_core::samplers::{
    ess, exponential_sample, mala_sample, rto_draws, stream, truncated_mvn_sample, ChainSet, FnTarget, LsqSolver, MalaConfig, Purpose,
};

/// Seed of every randomized check.
const SEED: u64 = 1;

/// Failures and notes collected by one criterion.
#[derive(Default)]
struct Check {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    fn within(&mut self, elapsed: Duration, limit_s: f64) {
        self.require(elapsed.as_secs_f64() < limit_s, format!("runtime {:.1} s exceeds {limit_s} s", elapsed.as_secs_f64()));
    }
}

fn gmix(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_gmix")).args(args).env("RUST_LOG", "warn").output().expect("gmix starts");
    if !out.status.success() {
        panic!("gmix {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gmix-acceptance-{}", std::process::id())).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).expect("csv opens");
    let header = r.headers().expect("csv header").clone();
    r.records()
        .map(|rec| header.iter().zip(rec.expect("csv record").iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

fn summary_value(dir: &Path, quantity: &str, role: &str) -> Option<f64> {
    read_csv(&dir.join("summary.csv"))
        .into_iter()
        .find(|r| r["quantity"] == quantity && r["role"] == role)
        .and_then(|r| r["value"].parse().ok())
}

fn dense_posterior(model: &LinearGaussianModel, prior_cov: &DMatrix<f64>, prior_mean: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let a = model.forward();
    let noise_inv = model.noise_covariance().try_inverse().unwrap();
    let prior_inv = prior_cov.clone().try_inverse().unwrap();
    let cov = (a.transpose() * &noise_inv * a + &prior_inv).try_inverse().unwrap();
    let mean = &cov * (a.transpose() * noise_inv * model.data() + prior_inv * prior_mean);
    (mean, cov)
}

fn sample_moments(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.ncols() as f64;
    let mean = x.column_mean();
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        col -= &mean;
    }
    (mean, &c * c.transpose() / (n - 1.0))
}

/// `log N(y; 0, AΛ_wAᵀ + Σ_obs) − λᵀw`, the mixing posterior through the m-dimensional marginal.
fn mixing_oracle(model: &LinearGaussianModel, rates: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let a = model.forward();
    let cov = a * DMatrix::from_diagonal(w) * a.transpose() + model.noise_covariance();
    mvn_logpdf(model.data(), &DVector::zeros(model.data_dim()), &cov) - rates.dot(w)
}

/// Gradient of [`mixing_oracle`]: `½(aᵢᵀS⁻¹y)² − ½aᵢᵀS⁻¹aᵢ − λᵢ` with `S = AΛ_wAᵀ + Σ_obs`.
fn mixing_oracle_grad(model: &LinearGaussianModel, rates: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let a = model.forward();
    let s_inv = (a * DMatrix::from_diagonal(w) * a.transpose() + model.noise_covariance()).try_inverse().unwrap();
    let u = a.transpose() * (&s_inv * model.data());
    let k = (a.transpose() * &s_inv * a).diagonal();
    DVector::from_fn(w.len(), |i, _| 0.5 * u[i] * u[i] - 0.5 * k[i] - rates[i])
}

fn random_subset(g: &mut impl Rng, d: usize, r: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d).collect();
    for i in 0..r {
        let j = g.random_range(i..d);
        idx.swap(i, j);
    }
    idx.truncate(r);
    idx
}

// 1

fn posterior_component_exactness(c: &mut Check) {
    let start = Instant::now();
    let mut g = rng(SEED);
    let n = 200_000;
    let mut worst_z: f64 = 0.0;
    let mut worst_cov: f64 = 0.0;
    for inst in 0..50 {
        let d = g.random_range(1..=8);
        let m = g.random_range(1..=6);
        let model = if inst % 2 == 0 {
            random_model(&mut g, m, d)
        } else {
            let noise = random_spd(&mut g, m, 0.5);
            LinearGaussianModel::new(normal_matrix(&mut g, m, d), noise, normal_vector(&mut g, m)).unwrap()
        };
        let prior_mean = normal_vector(&mut g, d);
        let (prior_cov, prior): (DMatrix<f64>, Box<dyn CovarianceFactor>) = if inst % 3 == 0 {
            let cov = random_spd(&mut g, d, 0.3);
            (cov.clone(), Box::new(DenseCovariance::new(cov).unwrap()))
        } else {
            let w = uniform_vector(&mut g, d, 0.05, 3.0);
            (DMatrix::from_diagonal(&w), Box::new(DiagonalCovariance::new(w).unwrap()))
        };
        let draws = rto_draws(&model, prior.as_ref(), &prior_mean, n, &mut stream(SEED, Purpose::Test, inst)).unwrap();
        let (mean, cov) = dense_posterior(&model, &prior_cov, &prior_mean);
        let (emp_mean, emp_cov) = sample_moments(&draws);
        for i in 0..d {
            let z = (emp_mean[i] - mean[i]).abs() / (cov[(i, i)] / n as f64).sqrt();
            worst_z = worst_z.max(z);
            c.require(z < 4.0, format!("instance {inst}: mean of coordinate {i} is {z:.2} standard errors off"));
        }
        let rel = (emp_cov - &cov).norm() / cov.norm();
        worst_cov = worst_cov.max(rel);
        c.require(rel < 0.1, format!("instance {inst}: covariance off by {:.1}%", 100.0 * rel));
    }
    c.note(format!("largest mean deviation {worst_z:.2} SE, largest covariance error {:.2}%", 100.0 * worst_cov));
    c.within(start.elapsed(), 60.0);
}

// 2

fn marginal_likelihood_identity(c: &mut Check) {
    let mut g = rng(SEED + 2);
    let mut worst: f64 = 0.0;
    for pair in 0..100 {
        let d = g.random_range(1..=8);
        let m = g.random_range(1..=8);
        let model = random_model(&mut g, m, d);
        let spec = GaussianComponentSpec::scale_mixture(d);
        let w1 = uniform_vector(&mut g, d, 0.05, 3.0);
        let w2 = uniform_vector(&mut g, d, 0.05, 3.0);
        let got = log_marginal_y_given_w(&model, &spec, &w1).unwrap() - log_marginal_y_given_w(&model, &spec, &w2).unwrap();
        let zero = DVector::zeros(d);
        let gauss = |w: &DVector<f64>| mixing_oracle(&model, &zero, w);
        let want = gauss(&w1) - gauss(&w2);
        let err = (got - want).abs() / want.abs().max(1.0);
        worst = worst.max(err);
        c.require(err < 1e-9, format!("pair {pair}: {got} vs {want}"));

        // the Laplace mixing evaluator carries the same differences plus the exponential prior
        let rates = uniform_vector(&mut g, d, 0.3, 3.0);
        let ev = WSpaceEvaluator::new(&model, rates.clone()).unwrap();
        let got = ev.log_density_w(&w1).unwrap() - ev.log_density_w(&w2).unwrap();
        let want = mixing_oracle(&model, &rates, &w1) - mixing_oracle(&model, &rates, &w2);
        let err = (got - want).abs() / want.abs().max(1.0);
        worst = worst.max(err);
        c.require(err < 1e-9, format!("pair {pair}, mixing evaluator: {got} vs {want}"));
    }
    c.note(format!("largest relative discrepancy {worst:.1e}"));
}

// 3

fn derivative_correctness(c: &mut Check) {
    let mut g = rng(SEED + 3);
    let (mut worst_g, mut worst_h): (f64, f64) = (0.0, 0.0);
    for inst in 0..24 {
        let d = g.random_range(1..=12);
        let m = g.random_range(1..=12);
        let model = random_model(&mut g, m, d);
        let rates = uniform_vector(&mut g, d, 0.3, 3.0);
        let ev = WSpaceEvaluator::new(&model, rates).unwrap();
        let w = uniform_vector(&mut g, d, 0.1, 2.0);

        let fd = fd_grad(|x| ev.log_density_w(x).unwrap(), &w, |x, i| 1e-5 * x[i]);
        let e = max_rel_err(&ev.grad_log_density_w(&w).unwrap(), &fd);
        worst_g = worst_g.max(e);
        c.require(e < 1e-5, format!("instance {inst}: w-gradient relative error {e:.1e}"));

        let h = ev.hessian_log_density_w(&w).unwrap();
        let mut fd_h = DMatrix::zeros(d, d);
        for j in 0..d {
            let step = 1e-5 * w[j];
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[j] += step;
            wm[j] -= step;
            fd_h.set_column(j, &((ev.grad_log_density_w(&wp).unwrap() - ev.grad_log_density_w(&wm).unwrap()) / (2.0 * step)));
        }
        let e = (&h - &fd_h).amax() / h.amax();
        worst_h = worst_h.max(e);
        c.require(e < 1e-4, format!("instance {inst}: Hessian relative error {e:.1e}"));

        let vev = VSpaceEvaluator::new(ev.clone());
        let v = uniform_vector(&mut g, d, -2.5, 1.0);
        let fd = fd_grad(|x| vev.log_density_v(x).unwrap(), &v, |_, _| 1e-5);
        let e = max_rel_err(&vev.grad_log_density_v(&v).unwrap(), &fd);
        worst_g = worst_g.max(e);
        c.require(e < 1e-5, format!("instance {inst}: v-gradient relative error {e:.1e}"));

        let r = g.random_range(1..=d);
        let red = ReducedVEvaluator::new(&ev, CoordinateSplit::new(d, &random_subset(&mut g, d, r)).unwrap()).unwrap();
        let v = uniform_vector(&mut g, r, -2.5, 1.0);
        let fd = fd_grad(|x| red.log_density(x).unwrap(), &v, |_, _| 1e-5);
        let e = max_rel_err(&red.grad(&v).unwrap(), &fd);
        worst_g = worst_g.max(e);
        c.require(e < 1e-5, format!("instance {inst}: reduced gradient relative error {e:.1e}"));
    }
    c.note(format!("largest gradient error {worst_g:.1e}, largest Hessian error {worst_h:.1e}"));
}

// 4

fn fast_path_equivalence(c: &mut Check) {
    let mut g = rng(SEED + 4);
    let mut worst: f64 = 0.0;
    for inst in 0..20 {
        let d = g.random_range(10..=50);
        let m = g.random_range(5..=50);
        let model = random_model(&mut g, m, d);
        let rates = uniform_vector(&mut g, d, 0.3, 3.0);
        let ev = WSpaceEvaluator::new(&model, rates.clone()).unwrap();
        let r = g.random_range(1..=10);
        let support = random_subset(&mut g, d, r);

        // sparse MAP objective against the marginal oracle
        let sparse_w = |g: &mut rand_chacha::ChaCha8Rng| {
            let mut w = DVector::zeros(d);
            for &i in &support {
                w[i] = g.random_range(0.01..2.0);
            }
            w
        };
        let (w1, w2) = (sparse_w(&mut g), sparse_w(&mut g));
        let (f1, g1) = ev.sparse_map_objective(&w1).unwrap();
        let (f2, _) = ev.sparse_map_objective(&w2).unwrap();
        let want = -(mixing_oracle(&model, &rates, &w1) - mixing_oracle(&model, &rates, &w2));
        let e = ((f1 - f2) - want).abs() / want.abs().max(1.0);
        worst = worst.max(e);
        c.require(e < 1e-8, format!("instance {inst}: MAP objective difference off by {e:.1e}"));
        let want_g = -mixing_oracle_grad(&model, &rates, &w1);
        let e = (&g1 - &want_g).amax() / want_g.amax();
        worst = worst.max(e);
        c.require(e < 1e-8, format!("instance {inst}: MAP gradient off by {e:.1e}"));

        // reduced evaluator against the oracle at the assembled point
        let split = CoordinateSplit::new(d, &support).unwrap();
        let red = ReducedVEvaluator::new(&ev, split.clone()).unwrap();
        let oracle_v = |v: &DVector<f64>| mixing_oracle(&model, &rates, &red.assemble(v).unwrap().map(f64::exp)) + v.sum();
        let v1 = uniform_vector(&mut g, r, -2.5, 1.0);
        let v2 = uniform_vector(&mut g, r, -2.5, 1.0);
        let got = red.log_density(&v1).unwrap() - red.log_density(&v2).unwrap();
        let want = oracle_v(&v1) - oracle_v(&v2);
        let e = (got - want).abs() / want.abs().max(1.0);
        worst = worst.max(e);
        c.require(e < 1e-8, format!("instance {inst}: reduced density difference off by {e:.1e}"));
        let w = red.assemble(&v1).unwrap().map(f64::exp);
        let full = mixing_oracle_grad(&model, &rates, &w);
        let want_g = DVector::from_fn(r, |k, _| full[split.selected()[k]] * w[split.selected()[k]] + 1.0);
        let e = (red.grad(&v1).unwrap() - &want_g).amax() / want_g.amax();
        worst = worst.max(e);
        c.require(e < 1e-8, format!("instance {inst}: reduced gradient off by {e:.1e}"));
    }
    c.note(format!("largest relative discrepancy {worst:.1e}"));
}

// 5

/// Nested adaptive Simpson over a box split into unit-width panels.
fn quad2<F: Fn(f64, f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    let pieces = (hi - lo).round() as usize;
    integrate_panels(&|a: f64| integrate_panels(&|b: f64| f(a, b), lo, hi, pieces, 1e-11), lo, hi, pieces, 1e-10)
}

/// Mean and variance of each coordinate under an unnormalized 2D log density, by quadrature.
fn quad_moments<L, T>(log_density: &L, transform: &T, lo: f64, hi: f64) -> [(f64, f64); 2]
where
    L: Fn(f64, f64) -> f64,
    T: Fn(f64) -> f64,
{
    let step = (hi - lo) / 200.0;
    let mut top = f64::NEG_INFINITY;
    for i in 0..=200 {
        for j in 0..=200 {
            top = top.max(log_density(lo + i as f64 * step, lo + j as f64 * step));
        }
    }
    let dens = |a: f64, b: f64| (log_density(a, b) - top).exp();
    let z = quad2(&dens, lo, hi);
    let mut out = [(0.0, 0.0); 2];
    for (k, slot) in out.iter_mut().enumerate() {
        let pick = move |a: f64, b: f64| transform(if k == 0 { a } else { b });
        let m1 = quad2(&|a, b| pick(a, b) * dens(a, b), lo, hi) / z;
        let m2 = quad2(&|a, b| pick(a, b).powi(2) * dens(a, b), lo, hi) / z;
        *slot = (m1, m2 - m1 * m1);
    }
    out
}

/// Largest deviation, in Monte Carlo standard errors, of chain means and variances from `want`.
/// Standard errors use the effective sample size of each series.
fn z_scores(set: &ChainSet, want: &[(f64, f64); 2]) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, (mean, var)) in want.iter().enumerate() {
        let traces: Vec<Vec<f64>> = set.chains().iter().map(|c| c.coordinate(i)).collect();
        let pooled: Vec<f64> = traces.concat();
        let n = pooled.len() as f64;
        let m = pooled.iter().sum::<f64>() / n;
        let sd = (pooled.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let ess_x: f64 = traces.iter().map(|t| ess(t).ess).sum();
        out.push((m - mean).abs() / (sd / ess_x.sqrt()));

        let sq: Vec<Vec<f64>> = traces.iter().map(|t| t.iter().map(|x| (x - m).powi(2)).collect()).collect();
        let pooled_sq: Vec<f64> = sq.concat();
        let v = pooled_sq.iter().sum::<f64>() / (n - 1.0);
        let vm = pooled_sq.iter().sum::<f64>() / n;
        let sd_sq = (pooled_sq.iter().map(|x| (x - vm).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let ess_sq: f64 = sq.iter().map(|t| ess(t).ess).sum();
        out.push((v - var).abs() / (sd_sq / ess_sq.sqrt()));
    }
    out
}

fn quadrature_ground_truth(c: &mut Check) {
    let start = Instant::now();
    let exp = build_toy(SEED).unwrap();
    let ev = WSpaceEvaluator::new(&exp.model, exp.prior.mixing_rates()).unwrap();
    let lam = ev.rates().clone();
    let w_of = |a: f64, b: f64| DVector::from_vec(vec![a.exp(), b.exp()]);
    let log_w_post = |a: f64, b: f64| ev.log_density_w(&w_of(a, b)).unwrap() + a + b;
    let log_x_post = |a: f64, b: f64| {
        let x = DVector::from_vec(vec![a, b]);
        exp.model.log_likelihood(&x) + exp.prior.log_density(&x)
    };
    let w_truth = quad_moments(&log_w_post, &f64::exp, -30.0, 6.0);
    let x_truth = quad_moments(&log_x_post, &|t| t, -10.0, 10.0);

    let mut cfg = MalaConfig::new(4, 20_000, SEED);
    cfg.burn_in = Some(5_000);
    let vev = VSpaceEvaluator::new(ev.clone());
    let target = FnTarget::new(2, |v: &DVector<f64>| Ok((vev.log_density_v(v)?, vev.grad_log_density_v(v)?)));
    let ref_v = mala_sample(&target, &prior_mean_starts(&lam, 4, SEED), &cfg).unwrap();
    let ref_w = ref_v.map(2, |v| Ok(v.map(f64::exp))).unwrap();
    let ref_x = ccs_x_sampler(&exp.model, &exp.prior, &CoordinateSplit::full(2), &cfg).unwrap().x;

    let mut ccs_cfg = cfg.clone();
    ccs_cfg.seed = SEED + 1000;
    let ccs_w = ccs_w_sampler(&ev, &CoordinateSplit::full(2), &ccs_cfg).unwrap().w;
    let two_step_x = sample_components_chains(&exp.model, &ccs_w, SEED + 1000, LsqSolver::Cholesky).unwrap();

    let mut worst: f64 = 0.0;
    for (name, set, truth) in [
        ("reference MALA (w)", &ref_w, &w_truth),
        ("reference MALA (x)", &ref_x, &x_truth),
        ("CCS(W), r = d (w)", &ccs_w, &w_truth),
        ("two-step (x)", &two_step_x, &x_truth),
    ] {
        let z = z_scores(set, truth);
        let labels = ["mean 0", "variance 0", "mean 1", "variance 1"];
        for (l, v) in labels.iter().zip(&z) {
            worst = worst.max(*v);
            c.require(*v < 2.0, format!("{name} {l}: {v:.2} standard errors from quadrature"));
        }
    }
    c.note(format!("largest deviation {worst:.2} SE over 16 moments"));

    // Hellinger bound against the quadrature distance for every split of size one and two.
    let splits = [vec![0usize], vec![1], vec![0, 1]];
    let box_lo = -30.0;
    let box_hi = 6.0;
    let exact_z = quad2(&|a, b| log_w_post(a, b).exp(), box_lo, box_hi);
    for sel in splits {
        let split = CoordinateSplit::new(2, &sel).unwrap();
        let log_approx = |w: &DVector<f64>| -> gmix_core::Result<f64> {
            let mut fixed = w.clone();
            let mut extra = 0.0;
            for &j in split.complement() {
                fixed[j] = 1.0 / lam[j];
                extra += -lam[j] * w[j] + 1.0;
            }
            Ok(ev.log_density_w(&fixed)? + extra)
        };
        let log_approx_v = |a: f64, b: f64| log_approx(&w_of(a, b)).unwrap() + a + b;
        let approx_z = quad2(&|a, b| log_approx_v(a, b).exp(), box_lo, box_hi);
        let bc = quad2(&|a, b| (0.5 * (log_w_post(a, b) + log_approx_v(a, b))).exp(), box_lo, box_hi) / (exact_z * approx_z).sqrt();
        let h2 = (1.0 - bc).max(0.0);
        let mut hcfg = MalaConfig::new(2, 10_000, SEED + 2000);
        hcfg.burn_in = Some(2_000);
        let draws = ccs_w_sampler(&ev, &split, &hcfg).unwrap().w.pooled();
        let est = hellinger_bound_estimate_fn(|w| ev.log_density_w(w), log_approx, &draws).unwrap();
        c.note(format!("I = {sel:?}: estimate {est:.3e}, quadrature H² {h2:.3e}"));
        c.require(est >= h2, format!("I = {sel:?}: estimate {est:.3e} below quadrature H² {h2:.3e}"));
    }
    c.within(start.elapsed(), 300.0);
}

// 6

fn epsilon_curves(c: &mut Check) {
    let check_curve = |c: &mut Check, name: &str, h: &DVector<f64>| {
        let eps = epsilon_curve(h);
        let monotone = eps.windows(2).all(|p| p[1] <= p[0]);
        c.require(monotone, format!("{name}: ε(r) increases somewhere"));
        c.require(eps.last() == Some(&0.0), format!("{name}: ε(d) = {:?}", eps.last()));
        c.require(eps.iter().all(|e| e.is_finite() && *e >= 0.0), format!("{name}: ε(r) has negative or non-finite values"));
    };
    let mut curves = 0;
    for preset in ["toy", "deblur-small"] {
        let exp = Preset::parse(preset).unwrap().build(SEED).unwrap();
        let ev = WSpaceEvaluator::new(&exp.model, exp.prior.mixing_rates()).unwrap();
        for source in [SourceKind::Prior, SourceKind::MapApprox] {
            let mut cfg = RunConfig::new(preset, Method::CcsW, SEED);
            cfg.diagnostic_source = source;
            check_curve(c, &format!("{preset} w, {}", source.name()), &mixing_diagnostic(&ev, &cfg).unwrap());
            check_curve(c, &format!("{preset} x, {}", source.name()), &parameter_diagnostic(&exp, &cfg).unwrap());
            curves += 2;
        }
    }
    // the toy diagnostic from exact posterior draws as well
    let exp = build_toy(SEED).unwrap();
    let ev = WSpaceEvaluator::new(&exp.model, exp.prior.mixing_rates()).unwrap();
    let mut cfg = MalaConfig::new(2, 5_000, SEED);
    cfg.burn_in = Some(1_000);
    let draws = ccs_w_sampler(&ev, &CoordinateSplit::full(2), &cfg).unwrap().w.pooled();
    check_curve(c, "toy w, reference", &estimate_diagnostic_w(&ev, &draws, DiagnosticSource::Reference).unwrap().h);
    curves += 1;
    c.note(format!("{curves} curves"));
}

// 7

fn desk_scale_table(c: &mut Check) {
    let start = Instant::now();
    let seed = SEED.to_string();
    let common = ["--preset", "deblur-small", "--r", "100", "--n-samples", "5000", "--n-chains", "5", "--seed", seed.as_str()];
    let dir_w = scratch("desk-ccs-w");
    let dir_x = scratch("desk-ccs-x");
    let cmp = scratch("desk-compare");
    for (method, dir) in [("ccs-w", &dir_w), ("ccs-x", &dir_x)] {
        let mut args = vec!["run", "--method", method, "--output", dir.to_str().unwrap()];
        args.extend_from_slice(&common);
        gmix(&args);
    }
    gmix(&["compare", dir_w.to_str().unwrap(), dir_x.to_str().unwrap(), "--output", cmp.to_str().unwrap()]);
    let table = read_csv(&cmp.join("ness_table.csv"));
    let row = table.iter().find(|r| r["sample_set"] == "x_I").expect("x_I row");
    let ness_w: f64 = row["ness_a"].parse().unwrap();
    let ness_x: f64 = row["ness_b"].parse().unwrap();
    let ratio = ness_w / ness_x;
    c.note(format!(
        "nESS w_I {:.3}, x_I {:.3} (CCS(W)); x_I {:.4} (CCS(X)); ratio {ratio:.1}",
        summary_value(&dir_w, "mean_ness", "w_I").unwrap_or(f64::NAN),
        ness_w,
        ness_x
    ));
    c.require(ratio >= 2.0, format!("nESS ratio {ratio:.2} below 2"));
    for (name, dir) in [("CCS(W)", &dir_w), ("CCS(X)", &dir_x)] {
        for row in read_csv(&dir.join("summary.csv")).into_iter().filter(|r| r["quantity"] == "max_epsr") {
            let e: f64 = row["value"].parse().unwrap_or(f64::NAN);
            c.note(format!("max EPSR {name} {} {e:.3}", row["role"]));
            c.require(e < 1.1, format!("{name} {}: max EPSR {e:.3}", row["role"]));
        }
    }
    c.within(start.elapsed(), 900.0);
}

// 8

fn sparsity_bands(c: &mut Check) {
    let start = Instant::now();
    let dir = scratch("deblur-map-w");
    let seed = SEED.to_string();
    gmix(&["run", "--preset", "deblur", "--method", "map-w", "--n-samples", "100", "--n-chains", "1", "--seed", &seed, "--output", dir.to_str().unwrap()]);
    let nnz = summary_value(&dir, "w_map_l0", "").unwrap_or(f64::NAN);
    c.note(format!("deblurring ‖w_MAP‖₀ = {nnz} in {:.0} s", start.elapsed().as_secs_f64()));
    c.require((40.0..=80.0).contains(&nnz), format!("deblurring ‖w_MAP‖₀ = {nnz} outside [40, 80]"));
    c.within(start.elapsed(), 1800.0);

    let start = Instant::now();
    let exp = build_storm(&StormConfig::full(), SEED).unwrap();
    let ev = WSpaceEvaluator::new(&exp.model, exp.prior.mixing_rates()).unwrap();
    let approx = map_w_approx(&ev, &LbfgsbOptions::default()).unwrap();
    let nnz = approx.rank();
    c.note(format!("STORM ‖w_MAP‖₀ = {nnz} in {:.0} s", start.elapsed().as_secs_f64()));
    c.require((50..=500).contains(&nnz), format!("STORM ‖w_MAP‖₀ = {nnz} outside [50, 500]"));
    c.within(start.elapsed(), 1800.0);
}

// 9

fn sampler_unit_truths(c: &mut Check) {
    let n = 1_000_000;
    let draws = truncated_mvn_sample(&DVector::zeros(1), &DMatrix::identity(1, 1), n, &mut stream(SEED, Purpose::Test, 0)).unwrap();
    let mean = draws.row(0).sum() / n as f64;
    let want = (2.0 / std::f64::consts::PI).sqrt();
    c.note(format!("half-normal mean {mean:.4}"));
    c.require((mean - want).abs() < 0.003, format!("half-normal mean {mean} vs {want}"));

    let rates = DVector::from_vec(vec![0.5, 2.0, 10.0]);
    let draws = exponential_sample(&rates, n, &mut stream(SEED, Purpose::Test, 1)).unwrap();
    for (i, &l) in rates.iter().enumerate() {
        let x: Vec<f64> = draws.row(i).iter().copied().collect();
        let ks = ks_distance(&x, |v| 1.0 - (-l * v).exp());
        c.note(format!("exponential rate {l}: KS {ks:.5}"));
        c.require(ks < 0.002, format!("exponential rate {l}: KS {ks}"));
    }

    let ar1 = |phi: f64, len: usize, index: u32| {
        let mut r = stream(SEED, Purpose::Test, index);
        let s = (1.0 - phi * phi).sqrt();
        let mut x = vec![r.sample::<f64, _>(StandardNormal)];
        for t in 1..len {
            x.push(phi * x[t - 1] + s * r.sample::<f64, _>(StandardNormal));
        }
        x
    };
    let iid = ar1(0.0, 10_000, 2);
    let v = ess(&iid).ess / iid.len() as f64;
    c.note(format!("iid nESS {v:.3}"));
    c.require((0.9..=1.1).contains(&v), format!("iid nESS {v}"));
    let corr = ar1(0.9, 100_000, 3);
    let v = ess(&corr).ess / corr.len() as f64;
    c.note(format!("AR(1) nESS {v:.4}"));
    c.require((v - 0.053).abs() <= 0.01, format!("AR(1) nESS {v}"));
}

// 10

fn adjoint_gap<F, G>(apply: F, adjoint: G, d: usize, m: usize, index: u32) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut g = stream(SEED, Purpose::Test, index);
    let x = DVector::from_fn(d, |_, _| g.sample::<f64, _>(StandardNormal));
    let u = DVector::from_fn(m, |_, _| g.sample::<f64, _>(StandardNormal));
    let lhs = apply(&x).dot(&u);
    (lhs - x.dot(&adjoint(&u))).abs() / lhs.abs().max(1.0)
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for entry in std::fs::read_dir(&p).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != "timings.json") {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn structural_invariants(c: &mut Check) {
    let w = HaarTransform::new(1024, 10).unwrap().matrix();
    let e = (w.transpose() * &w - DMatrix::identity(1024, 1024)).amax();
    c.note(format!("Haar orthonormality {e:.1e}"));
    c.require(e < 1e-12, format!("Haar WᵀW − I = {e:e}"));

    let op = deblur_operator(&DeblurConfig::full()).unwrap();
    let gap = adjoint_gap(|x| op.apply(x).unwrap(), |u| op.apply_adjoint(u).unwrap(), 1024, 1024, 10);
    c.require(gap < 1e-10, format!("deblurring adjoint gap {gap:e}"));
    let storm = StormConfig::full();
    let op = StormOperator::new(storm.coarse, storm.k, storm.psf_sd).unwrap();
    let gap2 = adjoint_gap(|x| op.apply(x).unwrap(), |u| op.apply_adjoint(u).unwrap(), op.param_dim(), op.data_dim(), 11);
    c.require(gap2 < 1e-10, format!("STORM adjoint gap {gap2:e}"));
    c.note(format!("adjoint gaps {gap:.1e}, {gap2:.1e}"));

    let seed = SEED.to_string();
    // each method runs twice into the same directory; everything but the timings must match
    let mut runs = Vec::new();
    for method in ["ccs-w", "ccs-x"] {
        let dir = scratch(&format!("repro-{method}"));
        let mut snapshots = Vec::new();
        for _ in 0..2 {
            let _ = std::fs::remove_dir_all(&dir);
            gmix(&[
                "run", "--preset", "deblur-small", "--method", method, "--r", "20", "--n-samples", "200", "--n-chains", "2", "--seed", &seed,
                "--diagnostic-samples", "200", "--output", dir.to_str().unwrap(),
            ]);
            snapshots.push(files_under(&dir));
        }
        c.require(!snapshots[0].is_empty() && snapshots[0] == snapshots[1], format!("repeated {method} runs differ"));
        runs.push(dir);
    }

    // mixing draws from the coordinate-selected and MAP surrogates are strictly positive
    let mut positive = true;
    let mut count = 0usize;
    for chain in 0..2 {
        for role in ["w", "w_I"] {
            let values = Container::load(runs[0].join("chains").join(format!("{role}.{chain}.bin"))).unwrap().values;
            count += values.len();
            positive &= values.iter().all(|v| *v > 0.0 && v.is_finite());
        }
    }
    let exp: Experiment = Preset::DeblurSmall.build(SEED).unwrap();
    let ev = WSpaceEvaluator::new(&exp.model, exp.prior.mixing_rates()).unwrap();
    let approx = map_w_approx(&ev, &LbfgsbOptions::default()).unwrap();
    let draws = map_w_sampler(&approx, ev.rates(), 2_000, SEED).unwrap();
    count += draws.len();
    positive &= draws.iter().all(|v| *v > 0.0 && v.is_finite());
    c.note(format!("{count} mixing draws checked for positivity"));
    c.require(positive, "a mixing draw is not strictly positive");
}

fn split_top_is_consistent(c: &mut Check) {
    // the selected set of a diagnostic is the r largest entries, so the curve value at r is the
    // sum of the discarded entries
    let h = DVector::from_vec(vec![0.3, 2.0, 0.0, 1.1, 0.7]);
    let (split, eps) = split_top(&h, 2).unwrap();
    c.require(split.selected() == [1, 3], format!("selected {:?}", split.selected()));
    c.require((eps[1] - 2.0).abs() < 1e-15, format!("ε(2) = {}", eps[1]));
}

fn main() {
    let criteria: [(&str, fn(&mut Check)); 10] = [
        ("posterior-component exactness", posterior_component_exactness),
        ("marginal-likelihood identity", marginal_likelihood_identity),
        ("derivative correctness", derivative_correctness),
        ("fast-path equivalence", fast_path_equivalence),
        ("quadrature ground truth", quadrature_ground_truth),
        ("error bound curve", |c| {
            split_top_is_consistent(c);
            epsilon_curves(c)
        }),
        ("desk-scale nESS table", desk_scale_table),
        ("MAP(W) sparsity bands", sparsity_bands),
        ("sampler unit truths", sampler_unit_truths),
        ("structural invariants", structural_invariants),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut check = Check::default();
        if let Err(panic) = catch_unwind(AssertUnwindSafe(|| run(&mut check))) {
            let msg = panic.downcast_ref::<String>().cloned().or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()));
            check.failures.push(format!("panicked: {}", msg.unwrap_or_default()));
        }
        let status = if check.failures.is_empty() { "PASS" } else { "FAIL" };
        let mut detail = check.notes.join("; ");
        if !check.failures.is_empty() {
            failed += 1;
            let shown: Vec<&str> = check.failures.iter().take(5).map(String::as_str).collect();
            detail = format!("{} | failures: {}{}", detail, shown.join("; "), if check.failures.len() > 5 { "; ..." } else { "" });
        }
        println!("criterion {:>2} {status} {name} [{:.1} s]: {detail}", k + 1, start.elapsed().as_secs_f64());
    }
    let _ = std::fs::remove_dir_all(std::env::temp_dir().join(format!("gmix-acceptance-{}", std::process::id())));
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
