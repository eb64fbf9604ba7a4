//! Experiment configuration: a flat TOML document with scalar-or-list
//! dimension fields, validated into an explicit run list.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which experiment family a configuration drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentTag {
    #[serde(rename = "moments_vs_c")]
    MomentsVsC,
    #[serde(rename = "moments_vs_L")]
    MomentsVsL,
    #[serde(rename = "roc_hybrid")]
    RocHybrid,
    #[serde(rename = "roc_theoretical")]
    RocTheoretical,
    #[serde(rename = "roc_growing_LMN")]
    RocGrowingLmn,
    #[serde(rename = "mp_validation")]
    MpValidation,
    #[serde(rename = "trace_lemma")]
    TraceLemma,
}

impl ExperimentTag {
    pub fn label(&self) -> &'static str {
        match self {
            ExperimentTag::MomentsVsC => "moments_vs_c",
            ExperimentTag::MomentsVsL => "moments_vs_L",
            ExperimentTag::RocHybrid => "roc_hybrid",
            ExperimentTag::RocTheoretical => "roc_theoretical",
            ExperimentTag::RocGrowingLmn => "roc_growing_LMN",
            ExperimentTag::MpValidation => "mp_validation",
            ExperimentTag::TraceLemma => "trace_lemma",
        }
    }

    fn needs_pfa_grid(&self) -> bool {
        matches!(
            self,
            ExperimentTag::RocHybrid
                | ExperimentTag::RocTheoretical
                | ExperimentTag::RocGrowingLmn
        )
    }
}

/// One of the three closed-form approximation families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    A,
    B,
    C,
}

impl ModelTag {
    pub fn label(&self) -> &'static str {
        match self {
            ModelTag::A => "a",
            ModelTag::B => "b",
            ModelTag::C => "c",
        }
    }
}

/// A dimension field: one value, or a sweep list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum CountSpec {
    One(usize),
    Sweep(Vec<usize>),
}

impl CountSpec {
    fn len(&self) -> Option<usize> {
        match self {
            CountSpec::One(_) => None,
            CountSpec::Sweep(v) => Some(v.len()),
        }
    }

    fn at(&self, i: usize) -> usize {
        match self {
            CountSpec::One(v) => *v,
            CountSpec::Sweep(v) => v[i],
        }
    }
}

fn default_sigma2() -> f64 {
    1.0
}

fn default_root() -> usize {
    1
}

fn default_models() -> Vec<ModelTag> {
    vec![ModelTag::A, ModelTag::B, ModelTag::C]
}

/// Raw document as it appears on disk; list-valued dimension fields are
/// zipped position-wise (all lists must share one length) and scalar
/// fields are broadcast across the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: ExperimentTag,
    m: CountSpec,
    n: CountSpec,
    l: CountSpec,
    #[serde(default = "default_sigma2")]
    sigma2: f64,
    trials: usize,
    master_seed: u64,
    #[serde(default)]
    pfa_grid: Vec<f64>,
    #[serde(default = "default_models")]
    models: Vec<ModelTag>,
    #[serde(default)]
    channel_seed: Option<u64>,
    #[serde(default = "default_root")]
    zc_root: usize,
}

/// One (M, N, L) point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunDims {
    pub m: usize,
    pub n: usize,
    pub l: usize,
}

/// Fully validated configuration with the sweep expanded.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentTag,
    pub runs: Vec<RunDims>,
    pub sigma2: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub pfa_grid: Vec<f64>,
    pub models: Vec<ModelTag>,
    pub channel_seed: u64,
    pub zc_root: usize,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl ExperimentConfig {
    fn from_raw(raw: RawConfig) -> Result<Self> {
        let sweep_len = [raw.m.len(), raw.n.len(), raw.l.len()]
            .into_iter()
            .flatten()
            .try_fold(None::<usize>, |acc, len| match acc {
                None => Ok(Some(len)),
                Some(prev) if prev == len => Ok(acc),
                Some(prev) => Err(Error::Config(format!(
                    "sweep lists must have equal lengths, got {prev} and {len}"
                ))),
            })?
            .unwrap_or(1);
        if sweep_len == 0 {
            return Err(Error::Config("empty sweep list".into()));
        }
        let runs: Vec<RunDims> = (0..sweep_len)
            .map(|i| RunDims {
                m: raw.m.at(i),
                n: raw.n.at(i),
                l: raw.l.at(i),
            })
            .collect();
        for r in &runs {
            if r.n <= r.m + r.l {
                return Err(Error::Config(format!(
                    "N > M + L required, got M={}, N={}, L={}",
                    r.m, r.n, r.l
                )));
            }
            if r.n > 1
                && (raw.zc_root == 0 || raw.zc_root >= r.n || gcd(raw.zc_root, r.n) != 1)
            {
                return Err(Error::Config(format!(
                    "zc_root={} is not coprime with N={}",
                    raw.zc_root, r.n
                )));
            }
        }
        if !(raw.sigma2 > 0.0) {
            return Err(Error::Config(format!(
                "sigma2 must be > 0, got {}",
                raw.sigma2
            )));
        }
        if raw.trials < 2 {
            return Err(Error::Config(format!(
                "trials must be >= 2, got {}",
                raw.trials
            )));
        }
        for pair in raw.pfa_grid.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::Config(format!(
                    "pfa_grid must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if let (Some(&first), Some(&last)) = (raw.pfa_grid.first(), raw.pfa_grid.last()) {
            if first <= 0.0 || last >= 1.0 {
                return Err(Error::Config(
                    "pfa_grid values must lie in (0,1)".into(),
                ));
            }
        }
        if raw.experiment.needs_pfa_grid() && raw.pfa_grid.is_empty() {
            return Err(Error::Config(format!(
                "experiment {} requires a non-empty pfa_grid",
                raw.experiment.label()
            )));
        }
        if raw.models.is_empty() {
            return Err(Error::Config("models must not be empty".into()));
        }
        let mut seen = [false; 3];
        for &mtag in &raw.models {
            let idx = mtag as usize;
            if seen[idx] {
                return Err(Error::Config(format!(
                    "duplicate model '{}' in models",
                    mtag.label()
                )));
            }
            seen[idx] = true;
        }
        Ok(Self {
            experiment: raw.experiment,
            runs,
            sigma2: raw.sigma2,
            trials: raw.trials,
            master_seed: raw.master_seed,
            pfa_grid: raw.pfa_grid,
            models: raw.models,
            channel_seed: raw
                .channel_seed
                .unwrap_or_else(|| raw.master_seed.wrapping_add(1)),
            zc_root: raw.zc_root,
        })
    }
}

/// Parses and validates a TOML configuration document.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| Error::Config(format!("configuration parse error: {e}")))?;
    ExperimentConfig::from_raw(raw)
}

/// Parses and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}
