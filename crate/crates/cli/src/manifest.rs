//! Run manifests and small file helpers shared by the commands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use kglit::graph::DatasetPaths;
use kglit::{KgError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

/// One per artifact-producing command, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// Input file path -> SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub version: String,
    /// Milliseconds since the Unix epoch.
    pub started_at: u64,
    pub finished_at: u64,
}

pub fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        RunManifest {
            command: command.to_owned(),
            config: serde_json::Value::Null,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            started_at: now_millis(),
            finished_at: 0,
        }
    }

    pub fn config(mut self, config: impl Serialize) -> Self {
        self.config = serde_json::to_value(config).expect("config serializes");
        self
    }

    pub fn seed(mut self, name: &str, seed: u64) -> Self {
        self.seeds.insert(name.to_owned(), seed);
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn dataset_inputs(&mut self, paths: &DatasetPaths) -> Result<()> {
        for p in paths.all() {
            self.input(p)?;
        }
        Ok(())
    }

    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.finished_at = now_millis();
        write_json(&dir.join(MANIFEST_FILE), &self)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| KgError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Content hash of a dataset directory: the four files in fixed order, each
/// framed by its name and length.
pub fn dataset_sha256(paths: &DatasetPaths) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths.all() {
        let bytes = fs::read(p).map_err(|e| KgError::io(p, e))?;
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| KgError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| KgError::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| KgError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| KgError::Parse {
        path: PathBuf::from(path),
        line: e.line(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_hash_matches_known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        fs::write(&p, b"abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn dataset_hash_sees_every_file() {
        let dir = tempfile::tempdir().unwrap();
        let paths = DatasetPaths::in_dir(dir.path());
        for p in paths.all() {
            fs::write(p, "").unwrap();
        }
        let before = dataset_sha256(&paths).unwrap();
        fs::write(&paths.literals, "a\tb\t1\n").unwrap();
        assert_ne!(before, dataset_sha256(&paths).unwrap());
    }

    #[test]
    fn manifest_records_inputs_and_times() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("in.txt");
        fs::write(&p, "x").unwrap();
        let mut m = RunManifest::start("demo").config(("k", 1)).seed("main", 7);
        m.input(&p).unwrap();
        m.finish(dir.path()).unwrap();
        let back: RunManifest = read_json(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back.command, "demo");
        assert_eq!(back.seeds["main"], 7);
        assert_eq!(back.inputs.len(), 1);
        assert!(back.finished_at >= back.started_at);
    }
}
