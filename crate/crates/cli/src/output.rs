//! CSV, fits and manifest writers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Everything one experiment produces before it is written.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub table: Table,
    pub fits: serde_json::Value,
    /// Written as `<prefix>.json` when present.
    pub report: Option<serde_json::Value>,
    /// Short human-readable lines for stdout.
    pub summary: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: &'a str,
    pub config_sha256: String,
    pub config: &'a crate::config::RunConfig,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes the CSV, fits, optional report and manifest; returns their paths.
pub fn write_all(
    prefix: &Path,
    artifacts: &Artifacts,
    manifest: impl FnOnce(Vec<String>) -> serde_json::Value,
) -> Result<Vec<PathBuf>, CliError> {
    if let Some(dir) = prefix.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let csv = with_suffix(prefix, ".csv");
    let fits = with_suffix(prefix, ".fits.json");
    fs::write(&csv, artifacts.table.to_csv())?;
    write_json(&fits, &artifacts.fits)?;
    let mut paths = vec![csv, fits];
    if let Some(report) = &artifacts.report {
        let p = with_suffix(prefix, ".json");
        write_json(&p, report)?;
        paths.push(p);
    }
    let mpath = with_suffix(prefix, ".manifest.json");
    paths.push(mpath.clone());
    let names = paths.iter().map(|p| p.display().to_string()).collect();
    write_json(&mpath, &manifest(names))?;
    Ok(paths)
}
