//! `run.json`: what ran, with which configuration, on which inputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const RUN_FILE: &str = "run.json";

/// Digest of one input: a file, or the files of a directory or manifest.
#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub files: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl InputDigest {
    pub fn file(path: &Path) -> anyhow::Result<Self> {
        Ok(InputDigest {
            path: path.to_owned(),
            sha256: Some(sha256_file(path)?),
            files: BTreeMap::new(),
        })
    }

    /// Every regular file directly inside `dir`, except run records.
    pub fn dir(dir: &Path) -> anyhow::Result<Self> {
        let mut files = BTreeMap::new();
        for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
            let path = entry?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_owned();
            if path.is_file() && name != RUN_FILE {
                files.insert(name, sha256_file(&path)?);
            }
        }
        Ok(InputDigest { path: dir.to_owned(), sha256: None, files })
    }

    /// The manifest itself plus every file it references.
    pub fn manifest(path: &Path) -> anyhow::Result<Self> {
        let manifest = ivsum::corpus::Manifest::read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut files = BTreeMap::new();
        for v in &manifest.videos {
            let mut referenced = vec![v.segments_file.clone()];
            referenced.extend(v.frames_file.clone());
            if let Some(t) = &v.transcript_file {
                referenced.push(t.clone());
                referenced.push(ivsum::corpus::transcript_companion(t));
            }
            for f in referenced {
                files.insert(f.display().to_string(), sha256_file(&base.join(&f))?);
            }
        }
        Ok(InputDigest {
            path: path.to_owned(),
            sha256: Some(sha256_file(path)?),
            files,
        })
    }
}

#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    inputs: &'a BTreeMap<String, InputDigest>,
    /// Seconds since the Unix epoch at completion.
    finished_at: u64,
    wall_time_s: f64,
}

pub fn write_run_record(
    out: &Path,
    command: &str,
    config: &RunConfig,
    inputs: &BTreeMap<String, InputDigest>,
    started: Instant,
) -> anyhow::Result<()> {
    let record = RunRecord {
        tool: "ivsum",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        inputs,
        finished_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    ivsum::corpus::write_json(&out.join(RUN_FILE), &record)?;
    Ok(())
}
