//! Artifact writing: CSV tables, manifests and atomic file replacement.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};

/// Shortest round-trip decimal; `NaN`, `inf` and `-inf` for non-finite
/// values, an empty cell for missing ones.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_string()
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_number(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// An in-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(file: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            file: file.into(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Column-oriented constructor: every series must have the same length.
    pub fn from_columns(file: impl Into<String>, series: Vec<(String, Vec<f64>)>) -> Self {
        let len = series.first().map_or(0, |s| s.1.len());
        assert!(series.iter().all(|s| s.1.len() == len), "ragged columns");
        let columns = series.iter().map(|s| s.0.clone()).collect();
        let rows = (0..len)
            .map(|i| series.iter().map(|s| Cell::Num(s.1[i])).collect())
            .collect();
        Table {
            file: file.into(),
            columns,
            rows,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column; non-numeric cells become NaN.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r[i] {
                    Cell::Num(x) => x,
                    Cell::Int(n) => n as f64,
                    _ => f64::NAN,
                })
                .collect(),
        )
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.into_inner()
            .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))
    }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("not a file path")))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    pub rows: u64,
}

/// Writes the table into `dir` and returns its record.
pub fn write_table(dir: &Path, table: &Table) -> Result<ArtifactRecord> {
    let bytes = table.to_csv()?;
    write_atomic(&dir.join(&table.file), &bytes)?;
    Ok(ArtifactRecord {
        path: table.file.clone(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
        rows: table.rows.len() as u64,
    })
}

/// Key/value pair reported in a manifest's summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub key: String,
    pub value: f64,
}

/// Manifest contents beyond the run configurations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ManifestInfo {
    /// "figure", "simulate", "sweep", ...
    pub kind: String,
    pub name: String,
    pub artifacts: Vec<ArtifactRecord>,
    pub summary: Vec<Metric>,
    pub notes: Vec<String>,
}

fn manifest_table(info: &ManifestInfo) -> Result<toml::Table> {
    let mut m = toml::Table::new();
    m.insert("kind".into(), info.kind.clone().into());
    m.insert("name".into(), info.name.clone().into());
    m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    if !info.notes.is_empty() {
        m.insert(
            "notes".into(),
            toml::Value::Array(info.notes.iter().map(|n| n.clone().into()).collect()),
        );
    }
    if !info.summary.is_empty() {
        let mut s = toml::Table::new();
        for metric in &info.summary {
            s.insert(metric.key.clone(), metric.value.into());
        }
        m.insert("summary".into(), s.into());
    }
    let artifacts = info
        .artifacts
        .iter()
        .map(|a| toml::Value::try_from(a).map_err(Error::from))
        .collect::<Result<Vec<_>>>()?;
    m.insert("artifacts".into(), toml::Value::Array(artifacts));
    Ok(m)
}

/// Manifest of a single run: the resolved configuration plus a
/// `[manifest]` table, so the file itself parses as a configuration.
pub fn run_manifest(config: &RunConfig, info: &ManifestInfo) -> Result<String> {
    let mut doc = config.to_table()?;
    doc.insert("manifest".into(), manifest_table(info)?.into());
    Ok(toml::to_string(&doc)?)
}

/// Manifest of a multi-run artifact set; each configuration sits under
/// `[runs.<label>]`.
pub fn group_manifest(runs: &[(String, RunConfig)], info: &ManifestInfo) -> Result<String> {
    let mut doc = toml::Table::new();
    doc.insert("manifest".into(), manifest_table(info)?.into());
    let mut table = toml::Table::new();
    for (label, config) in runs {
        table.insert(label.clone(), config.to_table()?.into());
    }
    if !table.is_empty() {
        doc.insert("runs".into(), table.into());
    }
    Ok(toml::to_string(&doc)?)
}

/// Checks every artifact listed in a manifest against its recorded hash.
pub fn verify_manifest(dir: &Path, manifest: &str) -> Result<Vec<PathBuf>> {
    let doc: toml::Table = manifest
        .parse()
        .map_err(|e: toml::de::Error| Error::config("manifest", e.message().to_string()))?;
    let artifacts = doc
        .get("manifest")
        .and_then(|m| m.get("artifacts"))
        .and_then(|a| a.as_array())
        .ok_or_else(|| Error::config("manifest.artifacts", "missing"))?;
    let mut checked = Vec::new();
    for (i, a) in artifacts.iter().enumerate() {
        let field = |k: &str| {
            a.get(k)
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::config(format!("manifest.artifacts[{i}].{k}"), "missing"))
        };
        let path = dir.join(field("path")?);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if sha256_hex(&bytes) != field("sha256")? {
            return Err(Error::config(
                format!("manifest.artifacts[{i}].sha256"),
                format!("hash mismatch for {}", path.display()),
            ));
        }
        checked.push(path);
    }
    Ok(checked)
}
