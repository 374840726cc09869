use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Run record written next to the outputs. Holds no timestamps or host
/// details, so equal configs and inputs give byte-identical manifests.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub regions_ok: usize,
    pub regions_skipped: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(&bytes),
    })
}

/// Collects the files a command writes, keyed by path relative to the
/// output directory.
#[derive(Debug, Default)]
pub struct Outputs {
    root: PathBuf,
    files: BTreeMap<String, Vec<u8>>,
}

impl Outputs {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, rel: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.insert(rel.into(), bytes.into());
    }

    /// Writes every file, then the manifest listing their digests.
    pub fn finish(self, config: &RunConfig, inputs: &[PathBuf], ok: usize, skipped: usize) -> Result<()> {
        let mut input_digests = Vec::with_capacity(inputs.len());
        for p in inputs {
            input_digests.push(digest_file(p)?);
        }
        fs::create_dir_all(&self.root).with_context(|| format!("creating {}", self.root.display()))?;
        let mut outputs = Vec::with_capacity(self.files.len());
        for (rel, bytes) in &self.files {
            let path = self.root.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            outputs.push(FileDigest {
                path: rel.clone(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(bytes),
            });
        }
        let manifest = Manifest {
            tool: env!("CARGO_BIN_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config,
            inputs: input_digests,
            outputs,
            regions_ok: ok,
            regions_skipped: skipped,
        };
        let mut json = serde_json::to_vec_pretty(&manifest)?;
        json.push(b'\n');
        fs::write(self.root.join("run_manifest.json"), json)?;
        Ok(())
    }
}

/// CSV bytes with an explicit header, so empty tables still carry one.
pub fn csv_with_header<T: Serialize>(header: &[&str], rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))
}
