//! Run reports: per-coordinate statistics and run-level summaries, written as CSV.

use std::io::Write;

use gmix_core::reduction::epsilon_curve;
use gmix_core::samplers::{credible_interval, epsr, ess, ChainSet};

use crate::error::{stage, CliError, Result};
use crate::pipeline::{Role, RunOutput};

/// Credible levels reported per coordinate.
pub const LEVELS: [f64; 3] = [0.6, 0.9, 0.99];

#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateRow {
    pub role: Role,
    /// Index in the full parameter or mixing vector.
    pub coordinate: usize,
    pub mean: f64,
    /// `(lower, upper)` for each entry of [`LEVELS`].
    pub intervals: [(f64, f64); 3],
    pub ness: f64,
    /// Absent with a single chain.
    pub epsr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub quantity: String,
    /// Sample-set role, empty for run-level quantities.
    pub role: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<CoordinateRow>,
    pub summary: Vec<SummaryRow>,
    /// `ε(r)` for `r = 1..d`, when a diagnostic was estimated.
    pub epsilon: Option<Vec<f64>>,
}

fn coordinate_rows(role: Role, set: &ChainSet, index: &dyn Fn(usize) -> usize) -> Result<Vec<CoordinateRow>> {
    let n = set.n_samples() as f64;
    let mut rows = Vec::with_capacity(set.dim());
    for i in 0..set.dim() {
        let traces: Vec<Vec<f64>> = set.chains().iter().map(|c| c.coordinate(i)).collect();
        let pooled: Vec<f64> = traces.concat();
        let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
        let mut intervals = [(0.0, 0.0); 3];
        for (k, level) in LEVELS.iter().enumerate() {
            intervals[k] = credible_interval(&pooled, *level).map_err(stage("report"))?;
        }
        let ness = traces.iter().map(|t| ess(t).ess / n).sum::<f64>() / traces.len() as f64;
        let epsr = if traces.len() >= 2 {
            let refs: Vec<&[f64]> = traces.iter().map(|t| t.as_slice()).collect();
            Some(epsr(&refs).map_err(stage("report"))?)
        } else {
            None
        };
        rows.push(CoordinateRow { role, coordinate: index(i), mean, intervals, ness, epsr });
    }
    Ok(rows)
}

fn push(summary: &mut Vec<SummaryRow>, quantity: &str, role: &str, value: f64) {
    summary.push(SummaryRow { quantity: quantity.into(), role: role.into(), value });
}

/// Computes the report from the persisted content of a run.
pub fn build_report(out: &RunOutput) -> Result<Report> {
    let cfg = &out.config;
    let mut metadata = vec![
        ("experiment".to_string(), cfg.experiment.clone()),
        ("method".to_string(), cfg.method.name().to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("n_chains".to_string(), cfg.n_chains.to_string()),
        ("n_samples".to_string(), cfg.n_samples.to_string()),
        ("burn_in".to_string(), cfg.burn_in.to_string()),
    ];
    if cfg.method.is_ccs() {
        metadata.push(("diagnostic_source".into(), cfg.diagnostic_source.name().into()));
        metadata.push(("diagnostic_samples".into(), cfg.diagnostic_samples.to_string()));
    }

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (role, set) in &out.sets {
        let selected = out.selected.clone().unwrap_or_default();
        let index = |i: usize| match role {
            Role::WSelected | Role::XSelected => selected[i],
            Role::W | Role::X => i,
        };
        if matches!(role, Role::WSelected | Role::XSelected) && selected.len() != set.dim() {
            return Err(CliError::Malformed { path: role.name().into(), message: "selected index set does not match the chains".into() });
        }
        let r = coordinate_rows(*role, set, &index)?;
        let name = role.name();
        let ness: Vec<f64> = r.iter().map(|c| c.ness).collect();
        push(&mut summary, "mean_ness", name, ness.iter().sum::<f64>() / ness.len().max(1) as f64);
        push(&mut summary, "min_ness", name, ness.iter().copied().fold(f64::INFINITY, f64::min));
        if set.n_chains() >= 2 {
            push(&mut summary, "max_epsr", name, r.iter().filter_map(|c| c.epsr).fold(f64::NEG_INFINITY, f64::max));
        }
        let rates = set.acceptance_rates();
        push(&mut summary, "mean_acceptance", name, rates.iter().sum::<f64>() / rates.len() as f64);
        for (c, a) in rates.iter().enumerate() {
            push(&mut summary, &format!("acceptance_chain{c}"), name, *a);
        }
        rows.extend(r);
    }
    if let Some(sel) = &out.selected {
        push(&mut summary, "rank", "", sel.len() as f64);
    }
    let epsilon = out.diagnostic.as_ref().map(epsilon_curve);
    if let (Some(eps), Some(sel)) = (&epsilon, &out.selected) {
        if !sel.is_empty() {
            push(&mut summary, "epsilon_bound", "", eps[sel.len() - 1]);
        }
    }
    if let Some(w) = &out.w_map {
        push(&mut summary, "w_map_l0", "", w.iter().filter(|v| **v != 0.0).count() as f64);
    }
    Ok(Report { metadata, rows, summary, epsilon })
}

fn metadata_block(buf: &mut Vec<u8>, title: &str, metadata: &[(String, String)]) {
    writeln!(buf, "# {title}").expect("write to memory");
    for (k, v) in metadata {
        writeln!(buf, "# {k}: {v}").expect("write to memory");
    }
}

fn csv_bytes(mut buf: Vec<u8>, header: &[&str], records: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).expect("write to memory");
        for rec in records {
            w.write_record(&rec).expect("write to memory");
        }
        w.flush().expect("write to memory");
    }
    buf
}

impl Report {
    pub fn coordinates_csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        metadata_block(&mut buf, "per-coordinate statistics", &self.metadata);
        let header = [
            "role", "coordinate", "mean", "ci60_lo", "ci60_hi", "ci90_lo", "ci90_hi", "ci99_lo", "ci99_hi", "ness", "epsr",
        ];
        let records = self.rows.iter().map(|r| {
            let mut rec = vec![r.role.name().to_string(), r.coordinate.to_string(), r.mean.to_string()];
            for (lo, hi) in r.intervals {
                rec.push(lo.to_string());
                rec.push(hi.to_string());
            }
            rec.push(r.ness.to_string());
            rec.push(r.epsr.map(|e| e.to_string()).unwrap_or_default());
            rec
        });
        csv_bytes(buf, &header, records)
    }

    pub fn summary_csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        metadata_block(&mut buf, "run summary", &self.metadata);
        let records = self.summary.iter().map(|s| vec![s.quantity.clone(), s.role.clone(), s.value.to_string()]);
        csv_bytes(buf, &["quantity", "role", "value"], records)
    }

    pub fn epsilon_csv(&self) -> Option<Vec<u8>> {
        let eps = self.epsilon.as_ref()?;
        let mut buf = Vec::new();
        metadata_block(&mut buf, "error bound curve", &self.metadata);
        Some(csv_bytes(buf, &["r", "epsilon"], eps.iter().enumerate().map(|(k, e)| vec![(k + 1).to_string(), e.to_string()])))
    }

    pub fn value(&self, quantity: &str, role: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.quantity == quantity && s.role == role).map(|s| s.value)
    }
}
