use std::path::{Path, PathBuf};

use gmix_core::problems::Preset;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Full-dimensional MALA on both the parameter posterior and the mixing posterior.
    Reference,
    /// Coordinate-selected mixing sampler followed by exact component sampling.
    CcsW,
    /// MALA on the selected parameters with the rest fixed at zero.
    CcsX,
    /// Truncated-Gaussian mixing surrogate followed by exact component sampling.
    MapW,
    /// Gaussian approximation around the smoothed parameter mode.
    MapX,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Reference => "reference",
            Method::CcsW => "ccs-w",
            Method::CcsX => "ccs-x",
            Method::MapW => "map-w",
            Method::MapX => "map-x",
        }
    }

    pub fn is_ccs(&self) -> bool {
        matches!(self, Method::CcsW | Method::CcsX)
    }
}

/// Samples used to estimate the coordinate diagnostic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    #[default]
    Prior,
    MapApprox,
}

impl SourceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SourceKind::Prior => "prior",
            SourceKind::MapApprox => "map-approx",
        }
    }
}

fn default_n_samples() -> usize {
    5000
}

fn default_n_chains() -> usize {
    5
}

fn default_burn_in() -> f64 {
    0.2
}

fn default_output() -> PathBuf {
    PathBuf::from("gmix-run")
}

fn default_diagnostic_samples() -> usize {
    1000
}

/// One experiment run. Serialized as the `config.json` of a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Preset name: `deblur1d`, `deblur-small`, `storm2d`, `storm-small` or `toy`.
    pub experiment: String,
    pub method: Method,
    /// Fixed number of selected coordinates (CCS methods).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    /// Tolerance on the error bound `ε(r)` (CCS methods, together with `r_max`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<usize>,
    /// Retained draws per chain.
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_n_chains")]
    pub n_chains: usize,
    /// Adaptation length as a fraction of `n_samples`.
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_diagnostic_samples")]
    pub diagnostic_samples: usize,
    #[serde(default)]
    pub diagnostic_source: SourceKind,
    /// Worker threads; all available cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// How the coordinate split is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Selection {
    Fixed(usize),
    Tolerance { tau: f64, r_max: usize },
}

impl RunConfig {
    pub fn new(experiment: &str, method: Method, seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            method,
            r: None,
            tau: None,
            r_max: None,
            n_samples: default_n_samples(),
            n_chains: default_n_chains(),
            burn_in: default_burn_in(),
            seed,
            output: default_output(),
            diagnostic_samples: default_diagnostic_samples(),
            diagnostic_source: SourceKind::Prior,
            threads: None,
        }
    }

    /// Reads a JSON document and overrides its keys with `overrides`.
    pub fn from_json(text: Option<&str>, overrides: serde_json::Map<String, Value>) -> Result<Self> {
        let mut doc = match text {
            Some(t) => serde_json::from_str::<Value>(t).map_err(|e| CliError::config(format!("config is not valid JSON: {e}")))?,
            None => Value::Object(Default::default()),
        };
        let obj = doc.as_object_mut().ok_or_else(|| CliError::config("config must be a JSON object"))?;
        for (k, v) in overrides {
            obj.insert(k, v);
        }
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(Some(&text), Default::default())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn preset(&self) -> Result<Preset> {
        Preset::parse(&self.experiment).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn burn_in_len(&self) -> usize {
        (self.burn_in * self.n_samples as f64).round() as usize
    }

    pub fn selection(&self) -> Result<Option<Selection>> {
        match (self.method.is_ccs(), self.r, self.tau, self.r_max) {
            (false, None, None, None) => Ok(None),
            (false, ..) => Err(CliError::config(format!("method {} takes no r, tau or r_max", self.method.name()))),
            (true, Some(r), None, None) => Ok(Some(Selection::Fixed(r))),
            (true, None, Some(tau), Some(r_max)) => Ok(Some(Selection::Tolerance { tau, r_max })),
            (true, ..) => Err(CliError::config("CCS methods need either r or both tau and r_max")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.preset()?;
        match self.selection()? {
            Some(Selection::Fixed(0)) => return Err(CliError::config("r must be at least one")),
            Some(Selection::Tolerance { tau, r_max }) => {
                if !(tau >= 0.0 && tau.is_finite()) {
                    return Err(CliError::config("tau must be finite and nonnegative"));
                }
                if r_max == 0 {
                    return Err(CliError::config("r_max must be at least one"));
                }
            }
            _ => {}
        }
        if self.n_samples < 4 {
            return Err(CliError::config("n_samples must be at least four"));
        }
        if self.n_chains == 0 {
            return Err(CliError::config("n_chains must be at least one"));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(CliError::config("burn_in must lie in [0, 1)"));
        }
        if self.method.is_ccs() && self.diagnostic_samples == 0 {
            return Err(CliError::config("diagnostic_samples must be positive"));
        }
        if self.threads == Some(0) {
            return Err(CliError::config("threads must be positive"));
        }
        Ok(())
    }
}
