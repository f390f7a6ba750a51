//! Run artifacts: ledger and mode CSVs, checkpoints, reports and a JSON
//! manifest carrying the configuration and content hashes of every file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fieldio::FieldDump;
use crate::harness::{SweepOutcome, WaveReport};
use crate::acoustic::WaveRun;
use crate::trajectory::RunResult;

/// SHA-256 of `"blob <len>\0" + bytes`, hex encoded.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory, with `/` separators.
    pub path: String,
    pub hash: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub files: Vec<FileEntry>,
}

/// Collects files written below one directory.
struct Writer {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl Writer {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.push(FileEntry { path: rel.to_string(), hash: content_hash(bytes), bytes: bytes.len() });
        Ok(())
    }

    fn put_dump(&mut self, rel: &str, dump: &FieldDump) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        dump.write(&path)?;
        for p in [path.clone(), FieldDump::sidecar(&path)] {
            let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            let rel = p.strip_prefix(&self.root).expect("inside root").to_string_lossy().replace('\\', "/");
            self.files.push(FileEntry { path: rel, hash: content_hash(&bytes), bytes: bytes.len() });
        }
        Ok(())
    }

    fn finish(mut self, kind: &str, cfg: &RunConfig) -> Result<Manifest> {
        let cfg_json = serde_json::to_vec(cfg).map_err(|e| Error::Serde(e.to_string()))?;
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            tool: "nemalimit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            kind: kind.into(),
            config: cfg.clone(),
            config_hash: content_hash(&cfg_json),
            files: self.files,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serde(e.to_string()))?;
        let path = self.root.join("manifest.json");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

fn csv<F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>>(f: F) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Error::Serde(e.to_string()))?;
    Ok(buf)
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    serde_json::to_vec_pretty(v).map_err(|e| Error::Serde(e.to_string()))
}

fn add_run(w: &mut Writer, prefix: &str, run: &RunResult) -> Result<()> {
    w.put(&format!("{prefix}ledger.csv"), &csv(|b| run.ledger.write_csv(b))?)?;
    if !run.traces.traces.is_empty() {
        w.put(&format!("{prefix}modes.csv"), &csv(|b| run.traces.write_csv(b))?)?;
    }
    w.put(&format!("{prefix}diagnostics.json"), &json(&run.diagnostics)?)?;
    w.put_dump(&format!("{prefix}fields/final.bin"), &FieldDump::from_snapshot(run.trajectory.last()?))?;
    Ok(())
}

/// Writes `ledger.csv`, `modes.csv`, `diagnostics.json`, the final checkpoint and `manifest.json`.
pub fn write_run(dir: &Path, kind: &str, cfg: &RunConfig, run: &RunResult) -> Result<Manifest> {
    let mut w = Writer::new(dir)?;
    add_run(&mut w, "", run)?;
    w.finish(kind, cfg)
}

/// Writes `modes.csv`, `damping.json` and `manifest.json` of a linear wave run.
pub fn write_wave(dir: &Path, cfg: &RunConfig, run: &WaveRun, report: &WaveReport) -> Result<Manifest> {
    let mut w = Writer::new(dir)?;
    w.put("modes.csv", &csv(|b| run.traces.write_csv(b))?)?;
    w.put("damping.json", &json(report)?)?;
    w.finish("wave", cfg)
}

/// Writes the sweep report, the rate table, every member run and the reference.
pub fn write_sweep(dir: &Path, cfg: &RunConfig, out: &SweepOutcome) -> Result<Manifest> {
    let mut w = Writer::new(dir)?;
    w.put("report.json", out.report.to_json()?.as_bytes())?;
    w.put("rates.csv", out.report.rates_csv().as_bytes())?;
    add_run(&mut w, "reference/", &out.reference)?;
    for (eps, r) in &out.runs {
        if let Ok(run) = r {
            add_run(&mut w, &format!("eps_{eps}/"), run)?;
        }
    }
    w.finish("sweep", cfg)
}
