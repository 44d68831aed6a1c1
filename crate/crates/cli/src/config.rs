//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qsource::{DensityMatrix, SourceModel};
use serde::Deserialize;

/// Keys accepted in a `--config` file. Every key is optional; flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub source: Option<PathBuf>,
    pub preset: Option<String>,
    pub n: Option<Vec<usize>>,
    pub n_max: Option<usize>,
    pub eps: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub cap: Option<usize>,
    pub format: Option<Format>,
    pub bits: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // relative paths inside the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.source, &mut cfg.out, &mut cfg.cache_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// A resolved source and the label used for it in reports.
#[derive(Debug, Clone)]
pub struct Source {
    pub label: String,
    pub model: SourceModel,
}

pub fn resolve_source(file: Option<&Path>, preset: Option<&str>) -> Result<Source> {
    match (file, preset) {
        (Some(_), Some(_)) => bail!("give either --source or --preset, not both"),
        (None, None) => bail!("no source: pass --source FILE or --preset NAME"),
        (Some(path), None) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading source {}", path.display()))?;
            let model = SourceModel::from_json(&text).with_context(|| format!("parsing source {}", path.display()))?;
            let label = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into());
            Ok(Source { label, model })
        }
        (None, Some(name)) => Ok(Source {
            label: name.replace(' ', ""),
            model: parse_preset(name)?,
        }),
    }
}

/// `example1`, `maxmixed(d)` or `diag(p1,p2,…)` (a product source).
pub fn parse_preset(name: &str) -> Result<SourceModel> {
    let name = name.replace(' ', "");
    if name == "example1" {
        return Ok(SourceModel::example1());
    }
    let args = |prefix: &str| {
        name.strip_prefix(prefix)
            .and_then(|rest| rest.strip_prefix('('))
            .and_then(|rest| rest.strip_suffix(')'))
    };
    if let Some(d) = args("maxmixed") {
        let d: usize = d.parse().with_context(|| format!("bad dimension in preset {name}"))?;
        return Ok(SourceModel::maximally_mixed(d)?);
    }
    if let Some(list) = args("diag") {
        let p = list
            .split(',')
            .map(|x| x.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("bad probabilities in preset {name}"))?;
        return Ok(SourceModel::product(&DensityMatrix::diagonal(&p)?));
    }
    bail!("unknown preset {name:?}; expected example1, maxmixed(d) or diag(p1,...)")
}

pub fn check_eps(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        bail!("at least one --eps is required");
    }
    if let Some(bad) = eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        bail!("--eps must lie in (0, 1), got {bad}");
    }
    Ok(())
}

pub fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        bail!("--delta must be positive, got {delta}");
    }
    Ok(())
}

pub fn check_block_lengths(ns: &[usize]) -> Result<()> {
    if ns.is_empty() || ns.contains(&0) {
        bail!("block lengths must be at least 1");
    }
    Ok(())
}
