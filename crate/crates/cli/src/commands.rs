use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use gmix_core::mixing::WSpaceEvaluator;
use gmix_core::problems::Preset;
use gmix_core::reduction::epsilon_curve;

use crate::artifacts::{load_run, write_report, write_run};
use crate::config::{RunConfig, SourceKind};
use crate::error::{stage, CliError, Result};
use crate::pipeline::{run_on, Role};
use crate::report::{build_report, Report};

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config(format!("cannot build a pool of {n} threads: {e}")))?
            .install(f),
    }
}

/// Runs the configured pipeline and persists its artifacts.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    with_pool(cfg.threads, || {
        let exp = cfg.preset()?.build(cfg.seed).map_err(stage("problem construction"))?;
        let out = run_on(cfg, &exp)?;
        write_run(&out, Some(&exp))
    })
}

/// Recomputes the report of a run directory from its chains. Writes the report files into
/// `output` when given.
pub fn summarize(dir: &Path, output: Option<&Path>) -> Result<Report> {
    let out = load_run(dir)?;
    let report = build_report(&out)?;
    if let Some(o) = output {
        write_report(o, &report)?;
    }
    Ok(report)
}

type Table = Vec<BTreeMap<String, String>>;

fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let malformed = |e: csv::Error| CliError::Malformed { path: path.display().to_string(), message: e.to_string() };
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_slice());
    let header = r.headers().map_err(malformed)?.clone();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(malformed)?;
        rows.push(header.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect());
    }
    Ok(rows)
}

fn metadata(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.trim_start_matches('#').trim().split_once(": "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

fn num(row: Option<&BTreeMap<String, String>>, key: &str) -> Option<f64> {
    row.and_then(|r| r.get(key)).and_then(|v| v.parse().ok())
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn diff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(b? - a?)
}

/// Side-by-side comparison of two run directories.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    /// nESS table in CSV, one row per sample set.
    pub ness_table: Vec<u8>,
    /// Per-coordinate means and 90% intervals in CSV.
    pub curves: Vec<u8>,
}

pub fn compare(dir_a: &Path, dir_b: &Path, output: Option<&Path>) -> Result<Comparison> {
    let sum_a = read_table(&dir_a.join("summary.csv"))?;
    let sum_b = read_table(&dir_b.join("summary.csv"))?;
    let rep_a = read_table(&dir_a.join("report.csv"))?;
    let rep_b = read_table(&dir_b.join("report.csv"))?;
    let label = |dir: &Path| -> Result<String> {
        let meta: BTreeMap<String, String> = metadata(&dir.join("summary.csv"))?.into_iter().collect();
        Ok(format!(
            "{} {} seed {}",
            meta.get("experiment").map(String::as_str).unwrap_or("?"),
            meta.get("method").map(String::as_str).unwrap_or("?"),
            meta.get("seed").map(String::as_str).unwrap_or("?")
        ))
    };
    let mut head = Vec::new();
    head.extend_from_slice(format!("# a: {}\n# b: {}\n", label(dir_a)?, label(dir_b)?).as_bytes());

    let lookup = |t: &Table, q: &str, role: &str| t.iter().find(|r| r["quantity"] == q && r["role"] == role).cloned();
    let mut ness = head.clone();
    {
        let mut w = csv::Writer::from_writer(&mut ness);
        w.write_record(["sample_set", "ness_a", "ness_b", "delta"]).expect("write to memory");
        for role in Role::ALL {
            let a = num(lookup(&sum_a, "mean_ness", role.name()).as_ref(), "value");
            let b = num(lookup(&sum_b, "mean_ness", role.name()).as_ref(), "value");
            if a.is_none() && b.is_none() {
                continue;
            }
            w.write_record([role.name().to_string(), fmt(a), fmt(b), fmt(diff(a, b))]).expect("write to memory");
        }
        w.flush().expect("write to memory");
    }

    let key = |r: &BTreeMap<String, String>| -> (String, usize) {
        let role = r.get("role").cloned().unwrap_or_default();
        let order = Role::parse(&role).map(|x| x as usize).unwrap_or(usize::MAX);
        (format!("{order}:{role}"), r.get("coordinate").and_then(|c| c.parse().ok()).unwrap_or(0))
    };
    let index_a: BTreeMap<_, _> = rep_a.iter().map(|r| (key(r), r)).collect();
    let index_b: BTreeMap<_, _> = rep_b.iter().map(|r| (key(r), r)).collect();
    let mut keys: Vec<_> = index_a.keys().chain(index_b.keys()).cloned().collect();
    keys.sort();
    keys.dedup();
    let mut curves = head;
    {
        let mut w = csv::Writer::from_writer(&mut curves);
        w.write_record(["role", "coordinate", "mean_a", "mean_b", "delta_mean", "ci90_lo_a", "ci90_hi_a", "ci90_lo_b", "ci90_hi_b"])
            .expect("write to memory");
        for k in keys {
            let a = index_a.get(&k).copied();
            let b = index_b.get(&k).copied();
            let role = a.or(b).and_then(|r| r.get("role")).cloned().unwrap_or_default();
            let (ma, mb) = (num(a, "mean"), num(b, "mean"));
            w.write_record([
                role,
                k.1.to_string(),
                fmt(ma),
                fmt(mb),
                fmt(diff(ma, mb)),
                fmt(num(a, "ci90_lo")),
                fmt(num(a, "ci90_hi")),
                fmt(num(b, "ci90_lo")),
                fmt(num(b, "ci90_hi")),
            ])
            .expect("write to memory");
        }
        w.flush().expect("write to memory");
    }
    if let Some(o) = output {
        fs::create_dir_all(o).map_err(|e| CliError::io(o, e))?;
        fs::write(o.join("ness_table.csv"), &ness).map_err(|e| CliError::io(o, e))?;
        fs::write(o.join("curves.csv"), &curves).map_err(|e| CliError::io(o, e))?;
    }
    Ok(Comparison { ness_table: ness, curves })
}

/// Space in which the coordinate diagnostic is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Space {
    /// Mixing variables, as used by CCS(W).
    W,
    /// Parameters, as used by CCS(X).
    X,
}

/// Estimates the diagnostic and returns the `ε(r)` curve as CSV.
pub fn diagnose(experiment: &str, seed: u64, space: Space, source: SourceKind, samples: usize) -> Result<Vec<u8>> {
    let preset = Preset::parse(experiment).map_err(|e| CliError::config(e.to_string()))?;
    if samples == 0 {
        return Err(CliError::config("samples must be positive"));
    }
    let exp = preset.build(seed).map_err(stage("problem construction"))?;
    let mut cfg = RunConfig::new(experiment, crate::config::Method::CcsW, seed);
    cfg.diagnostic_samples = samples;
    cfg.diagnostic_source = source;
    let h = match space {
        Space::W => {
            let ev = WSpaceEvaluator::new(&exp.model, exp.prior.mixing_rates()).map_err(stage("mixing evaluator"))?;
            crate::pipeline::mixing_diagnostic(&ev, &cfg)?
        }
        Space::X => crate::pipeline::parameter_diagnostic(&exp, &cfg)?,
    };
    let eps = epsilon_curve(&h);
    let mut buf = format!(
        "# error bound curve\n# experiment: {experiment}\n# seed: {seed}\n# space: {}\n# diagnostic_source: {}\n# diagnostic_samples: {samples}\n",
        match space {
            Space::W => "w",
            Space::X => "x",
        },
        source.name()
    )
    .into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["r", "epsilon"]).expect("write to memory");
        for (k, e) in eps.iter().enumerate() {
            w.write_record([(k + 1).to_string(), e.to_string()]).expect("write to memory");
        }
        w.flush().expect("write to memory");
    }
    Ok(buf)
}
