//! Shared report envelope and input digests.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const TOOL_NAME: &str = "rigkit";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Top-level JSON object written by every subcommand.
#[derive(Clone, Debug, Serialize)]
pub struct Envelope<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub inputs: &'a [InputDigest],
    /// SHA-256 over the per-input digests, in order.
    pub inputs_digest: String,
    pub findings: &'a [String],
    pub result: &'a serde_json::Value,
}

fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| CliError::input(path.display(), e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::input(path.display(), e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Files that define a sequence directory's content for hashing: the
/// manifest plus every stream's index or data file, sorted by relative path.
fn sequence_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let manifest = dir.join(rigkit::dataset_io::MANIFEST_FILE);
    if manifest.is_file() {
        out.push(manifest);
    }
    if let Ok(entries) = fs::read_dir(dir) {
        let mut subdirs: Vec<PathBuf> =
            entries.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
        subdirs.sort();
        for sub in subdirs {
            for name in [
                rigkit::dataset_io::INDEX_FILE,
                rigkit::dataset_io::IMU_DATA_FILE,
                rigkit::dataset_io::TRAJECTORY_FILE,
            ] {
                let p = sub.join(name);
                if p.is_file() {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Digest of a file, or of a sequence directory's manifest and index files.
pub fn digest_input(path: &Path) -> Result<InputDigest> {
    let sha256 = if path.is_dir() {
        let mut h = Sha256::new();
        for f in sequence_files(path) {
            let rel = f.strip_prefix(path).unwrap_or(&f);
            h.update(rel.to_string_lossy().replace('\\', "/").as_bytes());
            h.update([0]);
            h.update(sha256_file(&f)?.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    } else {
        sha256_file(path)?
    };
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256,
    })
}

pub fn combined_digest(inputs: &[InputDigest]) -> String {
    let mut h = Sha256::new();
    for i in inputs {
        h.update(i.sha256.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}
