//! Output envelopes and atomic file writes.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const TOOL_VERSION: &str = concat!("strucox ", env!("CARGO_PKG_VERSION"));

/// Replay information carried by every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
}

impl Envelope {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            config_hash,
            seed,
            tool_version: TOOL_VERSION.to_string(),
        }
    }

    /// `# config_hash=..,seed=..,tool_version=..`
    pub fn comment_line(&self) -> String {
        format!(
            "# config_hash={},seed={},tool_version={}\n",
            self.config_hash, self.seed, self.tool_version
        )
    }

    pub fn parse_comment_line(line: &str) -> Option<Self> {
        let body = line.strip_prefix('#')?.trim();
        let mut hash = None;
        let mut seed = None;
        let mut version = None;
        for part in body.split(',') {
            let (k, v) = part.split_once('=')?;
            match k.trim() {
                "config_hash" => hash = Some(v.to_string()),
                "seed" => seed = v.parse().ok(),
                "tool_version" => version = Some(v.to_string()),
                _ => {}
            }
        }
        Some(Self {
            config_hash: hash?,
            seed: seed?,
            tool_version: version?,
        })
    }
}

/// A report body with the envelope fields flattened into it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    #[serde(flatten)]
    pub envelope: Envelope,
    #[serde(flatten)]
    pub body: T,
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, envelope: &Envelope, body: &T) -> Result<()> {
    let report = Report {
        envelope: envelope.clone(),
        body,
    };
    let mut bytes = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// CSV body preceded by the envelope comment line.
pub fn write_csv(path: &Path, envelope: &Envelope, csv_body: &str) -> Result<()> {
    let mut text = envelope.comment_line();
    text.push_str(csv_body);
    write_atomic(path, text.as_bytes())
}
