//! Run manifest: a hash chain over stage inputs and outputs.
//!
//! Every stage records the SHA-256 of each file it consumed and produced
//! plus a hash of the effective configuration. Before running, a stage
//! re-hashes its prerequisites and refuses to run if anything on disk no
//! longer matches what the producing stage recorded.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: String,
    pub config_hash: String,
    /// file name -> sha256, for files read by the stage
    pub inputs: BTreeMap<String, String>,
    /// file name -> sha256, for files written by the stage
    pub outputs: BTreeMap<String, String>,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<StageEntry>,
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Io(format!("cannot hash {}: {e}", path.display())))?;
    Ok(hash_bytes(&bytes))
}

impl Manifest {
    pub fn load(artifact_dir: &Path) -> Result<Self, CliError> {
        let path = artifact_dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::default());
        }
        let raw = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Io(format!("cannot read manifest: {e}")))?;
        serde_json::from_str(&raw).map_err(|e| CliError::Data(format!("corrupt manifest: {e}")))
    }

    pub fn save(&self, artifact_dir: &Path) -> Result<(), CliError> {
        let path = artifact_dir.join(MANIFEST_FILE);
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("cannot serialize manifest: {e}")))?;
        std::fs::write(&path, body)
            .map_err(|e| CliError::Io(format!("cannot write manifest: {e}")))?;
        Ok(())
    }

    pub fn entry(&self, stage: &str) -> Option<&StageEntry> {
        self.entries.iter().find(|e| e.stage == stage)
    }

    /// Replace (or append) the entry for `stage`.
    pub fn record(&mut self, entry: StageEntry) {
        match self.entries.iter_mut().find(|e| e.stage == entry.stage) {
            Some(existing) => *existing = entry,
            None => self.entries.push(entry),
        }
    }

    /// Verify that `file` (produced by `producer`) still matches the hash
    /// the producing stage recorded. Missing artifact or missing manifest
    /// entry means the prerequisite stage has not run.
    pub fn verify_prerequisite(
        &self,
        artifact_dir: &Path,
        producer: &str,
        file: &str,
    ) -> Result<(), CliError> {
        let path = artifact_dir.join(file);
        let entry = self
            .entry(producer)
            .ok_or_else(|| CliError::MissingPrerequisite(producer.to_owned()))?;
        let recorded = entry
            .outputs
            .get(file)
            .ok_or_else(|| CliError::MissingPrerequisite(producer.to_owned()))?;
        if !path.exists() {
            return Err(CliError::MissingPrerequisite(producer.to_owned()));
        }
        let actual = hash_file(&path)?;
        if &actual != recorded {
            return Err(CliError::Data(format!(
                "artifact {file} does not match the hash recorded by stage {producer}; \
                 re-run {producer} (expected {recorded}, found {actual})"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_hex() {
        let h = hash_bytes(b"hello");
        assert_eq!(h.len(), 64);
        assert_eq!(h, hash_bytes(b"hello"));
        assert_ne!(h, hash_bytes(b"world"));
    }

    #[test]
    fn roundtrip_and_replace() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::default();
        m.record(StageEntry {
            stage: "ingest".into(),
            config_hash: "c".into(),
            inputs: BTreeMap::new(),
            outputs: [("tweets.jsonl".to_owned(), "h1".to_owned())].into(),
            duration_s: 0.1,
        });
        m.save(dir.path()).unwrap();
        let loaded = Manifest::load(dir.path()).unwrap();
        assert_eq!(loaded.entries.len(), 1);

        let mut m2 = loaded;
        m2.record(StageEntry {
            stage: "ingest".into(),
            config_hash: "c2".into(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            duration_s: 0.2,
        });
        assert_eq!(m2.entries.len(), 1);
        assert_eq!(m2.entry("ingest").unwrap().config_hash, "c2");
    }

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("tweets.jsonl");
        std::fs::write(&file, "original").unwrap();
        let mut m = Manifest::default();
        m.record(StageEntry {
            stage: "ingest".into(),
            config_hash: "c".into(),
            inputs: BTreeMap::new(),
            outputs: [("tweets.jsonl".to_owned(), hash_file(&file).unwrap())].into(),
            duration_s: 0.0,
        });
        assert!(m.verify_prerequisite(dir.path(), "ingest", "tweets.jsonl").is_ok());

        std::fs::write(&file, "tampered").unwrap();
        assert!(matches!(
            m.verify_prerequisite(dir.path(), "ingest", "tweets.jsonl"),
            Err(CliError::Data(_))
        ));

        assert!(matches!(
            m.verify_prerequisite(dir.path(), "extract", "triples.jsonl"),
            Err(CliError::MissingPrerequisite(s)) if s == "extract"
        ));
    }
}
