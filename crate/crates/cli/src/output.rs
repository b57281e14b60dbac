//! Result records, CSV artifacts with JSON sidecars, and the on-disk cache.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub code_version: String,
    pub command: String,
    pub config_hash: String,
    pub inputs: Value,
    pub outputs: Value,
    pub diagnostics: Value,
    /// File names written to the output directory.
    pub artifacts: Vec<String>,
}

/// A CSV table held in memory until the run finishes.
#[derive(Debug, Clone)]
pub struct Table {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: impl Into<String>, header: &[&'static str]) -> Self {
        Self {
            file: file.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner()?)
    }
}

/// Shortest round-trip decimal; empty for missing values.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// SHA-256 over the schema and code versions, the command and its resolved inputs.
pub fn config_hash(command: &str, inputs: &Value) -> String {
    let mut h = Sha256::new();
    h.update(format!("schema={SCHEMA_VERSION};code={};cmd={command};", backflow_core::extremal::CODE_VERSION));
    h.update(serde_json::to_vec(inputs).expect("json"));
    hex::encode(h.finalize())
}

/// Everything a run emits: named files plus the summary printed on stdout.
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<u8>,
}

impl Artifacts {
    /// Serializes the tables, a `.meta.json` sidecar per table and the summary.
    pub fn build(mut record: ResultRecord, tables: &[Table]) -> Result<Self> {
        record.artifacts = tables.iter().map(|t| t.file.clone()).collect();
        let mut summary = serde_json::to_vec_pretty(&record)?;
        summary.push(b'\n');
        let mut files = Vec::new();
        for t in tables {
            files.push((t.file.clone(), t.to_bytes()?));
            files.push((format!("{}.meta.json", t.file), summary.clone()));
        }
        Ok(Self { files, summary })
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

pub struct Cache {
    root: PathBuf,
}

const SUMMARY_FILE: &str = "summary.json";

impl Cache {
    pub fn new(root: PathBuf) -> Self {
        Self { root }
    }

    fn entry(&self, hash: &str) -> PathBuf {
        self.root.join(hash)
    }

    pub fn load(&self, hash: &str) -> Option<Artifacts> {
        let dir = self.entry(hash);
        let summary = fs::read(dir.join(SUMMARY_FILE)).ok()?;
        let record: ResultRecord = serde_json::from_slice(&summary).ok()?;
        let mut files = Vec::new();
        for a in &record.artifacts {
            for name in [a.clone(), format!("{a}.meta.json")] {
                files.push((name.clone(), fs::read(dir.join(&name)).ok()?));
            }
        }
        Some(Artifacts { files, summary })
    }

    pub fn store(&self, hash: &str, artifacts: &Artifacts) -> Result<()> {
        let dir = self.entry(hash);
        let tmp = self.root.join(format!(".{hash}.tmp"));
        let _ = fs::remove_dir_all(&tmp);
        artifacts.write_to(&tmp)?;
        fs::write(tmp.join(SUMMARY_FILE), &artifacts.summary)?;
        let _ = fs::remove_dir_all(&dir);
        fs::rename(&tmp, &dir).with_context(|| format!("storing cache entry {}", dir.display()))?;
        Ok(())
    }
}
