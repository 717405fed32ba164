//! Files shared between subcommands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use hmt_core::learner::{DemoStore, EvalReport, TrainConfig};
use hmt_core::orchestrator::{build_demo_store, load_records, DemoFilter};
use hmt_core::sim::EpisodeConfig;
use serde::{Deserialize, Serialize};

pub const RUN_FORMAT: &str = "hmt-run/1";

pub fn scenario(spec: &str) -> Result<Arc<EpisodeConfig>> {
    let cfg = match spec {
        "default" => EpisodeConfig::default(),
        "reduced" => EpisodeConfig::reduced(),
        path => read_json(Path::new(path))?,
    };
    cfg.validate().with_context(|| format!("scenario {spec}"))?;
    Ok(Arc::new(cfg))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// A demo store file, or recorded episodes filtered with the defaults.
pub fn demos(path: &Path) -> Result<DemoStore> {
    if path.is_dir() {
        let records = load_records(path)?;
        let (store, summary) = build_demo_store(&records, &DemoFilter::default())?;
        tracing::info!(?summary, "built demonstrations from {}", path.display());
        Ok(store)
    } else {
        read_json(path)
    }
}

/// `<prefix>.<ext>`, keeping any dots already in the prefix.
pub fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub best_episode: Option<u64>,
    pub best_success_rate: Option<f64>,
    pub updates: u64,
    pub transitions: u64,
    /// Relative to the run directory.
    pub checkpoint: Option<String>,
}

/// `run.json` of a training output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub software_version: String,
    pub train_config: TrainConfig,
    pub scenario: EpisodeConfig,
    pub seeds: Vec<SeedSummary>,
}

pub struct Run {
    pub manifest: RunManifest,
    pub reports: Vec<EvalReport>,
}

pub fn load_run(dir: &Path) -> Result<Run> {
    let manifest: RunManifest = read_json(&dir.join("run.json"))?;
    if manifest.format != RUN_FORMAT {
        bail!("{}: unsupported run format {:?}", dir.display(), manifest.format);
    }
    let reports = read_json(&dir.join("reports.json"))?;
    Ok(Run { manifest, reports })
}
