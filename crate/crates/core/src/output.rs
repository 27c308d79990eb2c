//! CSV/JSON result files with SHA-256 digests, and the run manifest that
//! records them.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits round-trip every f64
            Cell::Real(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
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

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::DimensionMismatch {
                expected: self.header.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(bytes))
}

/// Writes `table` as CSV and returns the SHA-256 of the bytes written.
pub fn write_csv(table: &Table, path: impl AsRef<Path>) -> Result<String> {
    write_bytes(path.as_ref(), &table.to_bytes()?)
}

/// Writes pretty JSON and returns the SHA-256 of the bytes written.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<String> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_bytes(path.as_ref(), &bytes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance for one CLI run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub started: String,
    pub finished: Option<String>,
    pub stages: Vec<StageTiming>,
    pub files: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            started: chrono::Utc::now().to_rfc3339(),
            finished: None,
            stages: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Runs `f`, recording its wall time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push(StageTiming {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn add_file(&mut self, path: impl AsRef<Path>, sha256: String) {
        self.files.push(FileDigest {
            path: path.as_ref().display().to_string(),
            sha256,
        });
    }

    /// Stamps the finish time and writes the manifest as JSON.
    pub fn write(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.finished = Some(chrono::Utc::now().to_rfc3339());
        write_json(self, path)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<RunManifest> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Recomputes every recorded digest; returns the files that differ or are missing.
    pub fn verify(&self) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| sha256_file(&f.path).ok().as_deref() != Some(f.sha256.as_str()))
            .map(|f| f.path.clone())
            .collect()
    }
}

/// `out.csv` → `out.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.manifest.json"))
}

/// `out.csv` → `out_<suffix>.<ext>`.
pub fn sibling_path(out: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(["a", "b"]);
        assert_eq!(t.to_bytes().unwrap(), b"a,b\n");
    }

    #[test]
    fn reals_round_trip() {
        let mut t = Table::new(["x"]);
        let x = 0.1 + 0.2;
        t.push(vec![x.into()]).unwrap();
        let text = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        let back: f64 = text.lines().nth(1).unwrap().parse().unwrap();
        assert_eq!(back, x);
        assert!(t.push(vec![]).is_err());
    }

    #[test]
    fn digests_are_deterministic_and_verifiable() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(["i", "v"]);
        t.push(vec![1usize.into(), 2.5.into()]).unwrap();
        let p = dir.path().join("t.csv");
        let d1 = write_csv(&t, &p).unwrap();
        let d2 = write_csv(&t, &p).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1, sha256_file(&p).unwrap());
        let mut m = RunManifest::new("test", serde_json::json!({}));
        m.add_file(&p, d1);
        let mp = manifest_path(&p);
        m.write(&mp).unwrap();
        let back = RunManifest::read(&mp).unwrap();
        assert!(back.verify().is_empty());
        std::fs::write(&p, "changed").unwrap();
        assert_eq!(back.verify().len(), 1);
        assert_eq!(sibling_path(&p, "poincare", "csv"), dir.path().join("t_poincare.csv"));
    }
}
