use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::record::{EpisodeHeader, EpisodeRecord, StepRecord};
use super::OrchestratorError;
use crate::sim::Outcome;

const INDEX_FILE: &str = "index.jsonl";
const EPISODE_EXT: &str = "ndjson";
const PARTIAL_EXT: &str = "partial";

/// One line of a run directory's index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub seed: u64,
    pub steps: u64,
    pub outcome: Outcome,
}

fn io(path: &Path, e: std::io::Error) -> OrchestratorError {
    OrchestratorError::Io(format!("{}: {e}", path.display()))
}

/// Directory of episode files plus an append-only index. Finished episodes
/// are written under a temporary name and renamed into place; aborted ones
/// stay as `.partial` files that listing and demo extraction ignore.
#[derive(Debug, Clone)]
pub struct RunStore {
    dir: PathBuf,
}

impl RunStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, OrchestratorError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_of(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.{EPISODE_EXT}"))
    }

    fn check_id(id: &str) -> Result<(), OrchestratorError> {
        let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if ok {
            Ok(())
        } else {
            Err(OrchestratorError::Usage(format!("invalid episode id {id:?}")))
        }
    }

    /// Writes a finished record and appends it to the index. Existing
    /// episodes are never overwritten.
    pub fn save(&self, id: &str, record: &EpisodeRecord) -> Result<PathBuf, OrchestratorError> {
        Self::check_id(id)?;
        let path = self.path_of(id);
        if path.exists() {
            return Err(OrchestratorError::Usage(format!("episode {id:?} already exists")));
        }
        let tmp = self.dir.join(format!("{id}.{EPISODE_EXT}.{PARTIAL_EXT}"));
        fs::write(&tmp, record.to_ndjson()).map_err(|e| io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io(&path, e))?;
        let entry = IndexEntry { id: id.into(), seed: record.header.seed, steps: record.footer.steps, outcome: record.footer.outcome };
        let index = self.dir.join(INDEX_FILE);
        let mut f = fs::OpenOptions::new().create(true).append(true).open(&index).map_err(|e| io(&index, e))?;
        writeln!(f, "{}", serde_json::to_string(&entry).expect("index entries serialize")).map_err(|e| io(&index, e))?;
        Ok(path)
    }

    /// Quarantines an unfinished episode.
    pub fn save_partial(&self, id: &str, header: &EpisodeHeader, steps: &[StepRecord]) -> Result<PathBuf, OrchestratorError> {
        Self::check_id(id)?;
        #[derive(Serialize)]
        #[serde(tag = "kind", rename_all = "snake_case")]
        enum L<'a> {
            Header(&'a EpisodeHeader),
            Step(&'a StepRecord),
        }
        let mut text = serde_json::to_string(&L::Header(header)).expect("serializes") + "\n";
        for s in steps {
            text.push_str(&serde_json::to_string(&L::Step(s)).expect("serializes"));
            text.push('\n');
        }
        let path = self.dir.join(format!("{id}.{EPISODE_EXT}.{PARTIAL_EXT}"));
        fs::write(&path, text).map_err(|e| io(&path, e))?;
        Ok(path)
    }

    /// Index entries in insertion order.
    pub fn list(&self) -> Result<Vec<IndexEntry>, OrchestratorError> {
        let index = self.dir.join(INDEX_FILE);
        let text = match fs::read_to_string(&index) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io(&index, e)),
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| OrchestratorError::Format(format!("{}: {e}", index.display()))))
            .collect()
    }

    pub fn load(&self, id: &str) -> Result<EpisodeRecord, OrchestratorError> {
        Self::check_id(id)?;
        load_record(&self.path_of(id))
    }

    pub fn load_all(&self) -> Result<Vec<EpisodeRecord>, OrchestratorError> {
        self.list()?.iter().map(|e| self.load(&e.id)).collect()
    }

    pub fn partials(&self) -> Result<Vec<PathBuf>, OrchestratorError> {
        let mut out: Vec<PathBuf> = fs::read_dir(&self.dir)
            .map_err(|e| io(&self.dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == PARTIAL_EXT))
            .collect();
        out.sort();
        Ok(out)
    }
}

pub fn load_record(path: &Path) -> Result<EpisodeRecord, OrchestratorError> {
    let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
    EpisodeRecord::from_ndjson(&text)
}

/// Every finished episode under `path`: a single file, or all `.ndjson`
/// files in a directory (sorted by name; partial files skipped).
pub fn load_records(path: &Path) -> Result<Vec<EpisodeRecord>, OrchestratorError> {
    if path.is_file() {
        return Ok(vec![load_record(path)?]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == EPISODE_EXT))
        .collect();
    files.sort();
    files.iter().map(|p| load_record(p)).collect()
}
