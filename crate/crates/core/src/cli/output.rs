//! CSV tables, atomic file writes and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::CliError;

/// An in-memory table rendered as RFC-4180 CSV with a header row.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    /// `columns` are `(name, unit)` pairs; the header reads `name [unit]`.
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        Table { name: name.to_string(), header: columns.iter().map(|(c, u)| format!("{c} [{u}]")).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| CliError::Io(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Shortest round-trip decimal form; non-finite values are spelled out.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Write `bytes` to `path` through a temporary file in the same directory
/// and a rename, so the final path never holds a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|()| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    /// Reported without an assertion (e.g. quantities the theory does not constrain).
    Flagged,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Check { name: name.into(), status: if pass { Status::Pass } else { Status::Fail }, detail }
    }

    pub fn flagged(name: &str, detail: String) -> Self {
        Check { name: name.into(), status: Status::Flagged, detail }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Payload {
    pub path: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub toolkit_version: String,
    pub config: serde_json::Value,
    pub checks: Vec<Check>,
    pub payloads: Vec<Payload>,
    pub wall_clock_seconds: f64,
    /// SHA-256 over the payload files in order, each prefixed by its name.
    pub determinism_hash: String,
}

/// Everything a command produces before it is written to disk.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }
}

/// Write every table and then the manifest into `out`.
pub fn publish(out: &Path, command: &str, config: serde_json::Value, outcome: &Outcome, seconds: f64) -> Result<Manifest, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let mut hasher = Sha256::new();
    let mut payloads = Vec::new();
    for table in &outcome.tables {
        let bytes = table.to_csv()?;
        let file = format!("{}.csv", table.name);
        let path: PathBuf = out.join(&file);
        write_atomic(&path, &bytes)?;
        hasher.update(file.as_bytes());
        hasher.update([0u8]);
        hasher.update(&bytes);
        payloads.push(Payload { path: file, rows: table.len(), sha256: hex::encode(Sha256::digest(&bytes)) });
    }
    let manifest = Manifest {
        command: command.into(),
        toolkit_version: env!("CARGO_PKG_VERSION").into(),
        config,
        checks: outcome.checks.clone(),
        payloads,
        wall_clock_seconds: seconds,
        determinism_hash: hex::encode(hasher.finalize()),
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&out.join("manifest.json"), &json)?;
    Ok(manifest)
}
