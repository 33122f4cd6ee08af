//! Run directories.
//!
//! ```text
//! <dir>/config.json          resolved configuration
//! <dir>/chains/<role>.<c>.bin one container per chain and sample set
//! <dir>/selected.bin         selected coordinates (CCS and MAP(W) runs)
//! <dir>/diagnostic.bin       coordinate diagnostic (CCS runs)
//! <dir>/w_map.bin, x_map.bin modes (MAP runs)
//! <dir>/truth.bin, data.bin  ground truth and data of the experiment
//! <dir>/report.csv           per-coordinate statistics
//! <dir>/summary.csv          run-level statistics
//! <dir>/epsilon.csv          error bound curve (CCS runs)
//! <dir>/timings.json         wall-clock seconds per stage
//! ```
//!
//! Everything except `timings.json` is a deterministic function of the config.

use std::fs;
use std::path::{Path, PathBuf};

use gmix_core::container::Container;
use gmix_core::problems::Experiment;
use gmix_core::samplers::ChainSet;
use nalgebra::DVector;

use crate::config::RunConfig;
use crate::error::{stage, CliError, Result};
use crate::pipeline::{Role, RunOutput};
use crate::report::{build_report, Report};

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn save(path: &Path, c: &Container) -> Result<()> {
    write_file(path, &c.to_bytes())
}

fn load(path: &Path) -> Result<Container> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Container::from_bytes(&bytes).map_err(|e| match e {
        gmix_core::Error::Format { offset, message } => {
            CliError::Malformed { path: path.display().to_string(), message: format!("byte {offset}: {message}") }
        }
        other => CliError::Malformed { path: path.display().to_string(), message: other.to_string() },
    })
}

fn load_optional(path: &Path) -> Result<Option<Container>> {
    if path.exists() {
        load(path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn chain_path(dir: &Path, role: Role, chain: usize) -> PathBuf {
    dir.join("chains").join(format!("{}.{chain}.bin", role.name()))
}

/// Writes report files into `dir`.
pub fn write_report(dir: &Path, report: &Report) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_file(&dir.join("report.csv"), &report.coordinates_csv())?;
    write_file(&dir.join("summary.csv"), &report.summary_csv())?;
    if let Some(eps) = report.epsilon_csv() {
        write_file(&dir.join("epsilon.csv"), &eps)?;
    }
    Ok(())
}

/// Persists a run into `out.config.output` and returns its report.
pub fn write_run(out: &RunOutput, exp: Option<&Experiment>) -> Result<Report> {
    let dir = &out.config.output;
    let seed = out.config.seed;
    fs::create_dir_all(dir.join("chains")).map_err(|e| CliError::io(dir, e))?;
    write_file(&dir.join("config.json"), out.config.to_json().as_bytes())?;
    for (role, set) in &out.sets {
        for (c, chain) in set.chains().iter().enumerate() {
            save(&chain_path(dir, *role, c), &Container::from_chain(role.name(), chain).with_attribute("chain", c as u64))?;
        }
    }
    if let Some(sel) = &out.selected {
        let v = DVector::from_iterator(sel.len(), sel.iter().map(|&i| i as f64));
        save(&dir.join("selected.bin"), &Container::from_vector("selected", seed, &v))?;
    }
    for (name, v) in [("diagnostic", &out.diagnostic), ("w_map", &out.w_map), ("x_map", &out.x_map)] {
        if let Some(v) = v {
            save(&dir.join(format!("{name}.bin")), &Container::from_vector(name, seed, v))?;
        }
    }
    if let Some(exp) = exp {
        save(&dir.join("truth.bin"), &Container::from_vector("truth", seed, &exp.data.truth).with_attribute("experiment", exp.name.clone()))?;
        save(&dir.join("data.bin"), &Container::from_vector("data", seed, &exp.data.data).with_attribute("experiment", exp.name.clone()))?;
    }
    let timings: serde_json::Map<String, serde_json::Value> =
        out.timings.iter().map(|(k, v)| (k.clone(), serde_json::Value::from(*v))).collect();
    write_file(&dir.join("timings.json"), (serde_json::to_string_pretty(&timings).expect("serializes") + "\n").as_bytes())?;
    let report = build_report(out)?;
    write_report(dir, &report)?;
    Ok(report)
}

/// Reads a run directory back.
pub fn load_run(dir: &Path) -> Result<RunOutput> {
    let mut config = RunConfig::load(&dir.join("config.json"))?;
    config.output = dir.to_path_buf();
    let mut sets = Vec::new();
    for role in Role::ALL {
        let mut chains = Vec::new();
        for c in 0..config.n_chains {
            let path = chain_path(dir, role, c);
            if !path.exists() {
                break;
            }
            let container = load(&path)?;
            if container.header.role != role.name() {
                return Err(CliError::Malformed { path: path.display().to_string(), message: "role does not match the file name".into() });
            }
            chains.push(container.to_chain().map_err(stage("chain loading"))?);
        }
        match chains.len() {
            0 => {}
            n if n == config.n_chains => sets.push((role, ChainSet::new(chains).map_err(stage("chain loading"))?)),
            n => {
                return Err(CliError::Malformed {
                    path: dir.join("chains").display().to_string(),
                    message: format!("{} has {n} of {} chains", role.name(), config.n_chains),
                })
            }
        }
    }
    let selected = load_optional(&dir.join("selected.bin"))?.map(|c| c.values.iter().map(|v| *v as usize).collect());
    let vector = |name: &str| -> Result<Option<DVector<f64>>> { Ok(load_optional(&dir.join(format!("{name}.bin")))?.map(|c| c.to_vector())) };
    let timings = match fs::read_to_string(dir.join("timings.json")) {
        Ok(text) => serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(&text)
            .map_err(|e| CliError::Malformed { path: dir.join("timings.json").display().to_string(), message: e.to_string() })?
            .into_iter()
            .map(|(k, v)| (k, v.as_f64().unwrap_or(f64::NAN)))
            .collect(),
        Err(_) => Vec::new(),
    };
    Ok(RunOutput {
        config,
        sets,
        selected,
        diagnostic: vector("diagnostic")?,
        w_map: vector("w_map")?,
        x_map: vector("x_map")?,
        timings,
    })
}
