//! Run manifest and stage fingerprints.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use coedit_core::provenance::cache::write_atomic;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::PipelineError;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Computed,
    Cached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: StageStatus,
    pub fingerprint: String,
    /// Input name to checksum (or other identifying value).
    pub inputs: BTreeMap<String, String>,
    /// Output path, relative to the output directory, to SHA-256.
    pub outputs: BTreeMap<String, String>,
    /// Stage-specific counters.
    #[serde(default)]
    pub summary: BTreeMap<String, serde_json::Value>,
}

/// Earliest and latest event time seen while mining. Derived from the
/// data so that the manifest itself is reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DataSpan {
    pub first_event: Option<String>,
    pub last_event: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(default)]
    pub data_span: DataSpan,
    #[serde(default)]
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            tool_version: coedit_core::provenance::cache::TOOL_VERSION.to_string(),
            config_hash,
            seed,
            data_span: DataSpan::default(),
            stages: BTreeMap::new(),
        }
    }

    /// Loads the manifest in `out`, keeping stage records only when the tool
    /// version matches. Unreadable manifests are treated as absent.
    pub fn load_or_new(out: &Path, config_hash: String, seed: u64) -> Self {
        let mut fresh = Self::new(config_hash, seed);
        let Ok(text) = fs::read_to_string(out.join(MANIFEST_FILE)) else {
            return fresh;
        };
        match serde_json::from_str::<RunManifest>(&text) {
            Ok(old) if old.tool_version == fresh.tool_version => {
                fresh.stages = old.stages;
                fresh.data_span = old.data_span;
            }
            Ok(_) => {}
            Err(e) => log::warn!("ignoring unreadable {MANIFEST_FILE}: {e}"),
        }
        fresh
    }

    pub fn save(&self, out: &Path) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        let path = out.join(MANIFEST_FILE);
        write_atomic(&path, text.as_bytes()).map_err(|e| PipelineError::io(&path, e))
    }

    /// True when `stage` last ran with `fingerprint` and all its outputs are
    /// still present with their recorded contents.
    pub fn is_fresh(&self, out: &Path, stage: &str, fingerprint: &str) -> bool {
        let Some(rec) = self.stages.get(stage) else { return false };
        rec.fingerprint == fingerprint
            && rec
                .outputs
                .iter()
                .all(|(rel, sum)| sha256_file(&out.join(rel)).map_or(false, |s| &s == sum))
    }

    pub fn outputs_of(&self, stage: &str) -> BTreeMap<String, String> {
        self.stages.get(stage).map(|r| r.outputs.clone()).unwrap_or_default()
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    std::io::copy(&mut f, &mut h)?;
    Ok(hex::encode(h.finalize()))
}

/// Digest over a stage name, its settings and its inputs.
pub fn fingerprint(stage: &str, settings: &serde_json::Value, inputs: &BTreeMap<String, String>) -> String {
    let doc = serde_json::json!({
        "stage": stage,
        "tool_version": coedit_core::provenance::cache::TOOL_VERSION,
        "settings": settings,
        "inputs": inputs,
    });
    sha256_bytes(doc.to_string().as_bytes())
}

/// Checksums of every regular file below `dir`, keyed by relative path.
pub fn hash_tree(dir: &Path) -> std::io::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut stack: Vec<PathBuf> = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let entry = entry?;
            let path = entry.path();
            if entry.file_type()?.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).expect("below root").to_string_lossy().replace('\\', "/");
                out.insert(rel, sha256_file(&path)?);
            }
        }
    }
    Ok(out)
}

/// Writes files below `out` atomically and remembers their checksums.
#[derive(Debug)]
pub struct OutputSet {
    out: PathBuf,
    pub files: BTreeMap<String, String>,
}

impl OutputSet {
    pub fn new(out: &Path) -> Self {
        Self { out: out.to_path_buf(), files: BTreeMap::new() }
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
        let bytes = contents.as_ref();
        let path = self.out.join(rel);
        write_atomic(&path, bytes).map_err(|e| PipelineError::io(&path, e))?;
        self.files.insert(rel.to_string(), sha256_bytes(bytes));
        Ok(())
    }

    /// Registers a file some other component already wrote.
    pub fn adopt(&mut self, rel: &str) -> Result<(), PipelineError> {
        let path = self.out.join(rel);
        let sum = sha256_file(&path).map_err(|e| PipelineError::io(&path, e))?;
        self.files.insert(rel.to_string(), sum);
        Ok(())
    }
}
