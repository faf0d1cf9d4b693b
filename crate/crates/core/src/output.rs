//! Flat-file results: one CSV per data series plus a JSON summary.
//!
//! CSV layout: a single header line `# name:unit,name:unit,...` followed by
//! comma-separated rows. Floats use Rust's shortest round-trip formatting, so
//! parsing a cell returns the exact value that was written.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Where a table came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical configuration text.
    pub config_hash: String,
    pub code_version: String,
    /// Taken from `SOURCE_DATE_EPOCH` when set, so reruns stay byte-identical.
    pub timestamp: Option<u64>,
}

impl Provenance {
    pub fn for_config(canonical_config: &str) -> Self {
        Self {
            config_hash: sha256_hex(canonical_config.as_bytes()),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Named numeric table with per-column units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<String>,
    pub units: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl ResultTable {
    /// `columns` pairs each name with its unit; `"1"` marks dimensionless.
    pub fn new(name: &str, columns: &[(&str, &str)], provenance: Provenance) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.0.to_string()).collect(),
            units: columns.iter().map(|c| c.1.to_string()).collect(),
            rows: Vec::new(),
            provenance,
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch { expected: self.columns.len(), found: row.len() });
        }
        if let Some(x) = row.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite cell {x} in table {}", self.name)));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.len() != self.units.len() {
            return Err(Error::DimensionMismatch { expected: self.columns.len(), found: self.units.len() });
        }
        if self.provenance.config_hash.is_empty() {
            return Err(Error::InvalidParameter(format!("table {} has no provenance", self.name)));
        }
        for r in &self.rows {
            if r.len() != self.columns.len() || r.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("malformed row in table {}", self.name)));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("# ");
        let header: Vec<String> = self.columns.iter().zip(&self.units).map(|(c, u)| format!("{c}:{u}")).collect();
        s.push_str(&header.join(","));
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format_float(*x)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Inverse of [`ResultTable::to_csv`]; provenance is not part of the CSV.
    pub fn from_csv(name: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|h| h.strip_prefix("# "))
            .ok_or_else(|| Error::Config(format!("{name}: missing `# col:unit` header")))?;
        let mut columns = Vec::new();
        let mut units = Vec::new();
        for cell in header.split(',') {
            let (c, u) = cell.split_once(':').ok_or_else(|| Error::Config(format!("{name}: bad header cell `{cell}`")))?;
            columns.push(c.to_string());
            units.push(u.to_string());
        }
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let row = line
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| Error::Config(format!("{name}: {e} in `{c}`"))))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != columns.len() {
                return Err(Error::DimensionMismatch { expected: columns.len(), found: row.len() });
            }
            rows.push(row);
        }
        Ok(Self { name: name.to_string(), columns, units, rows, provenance: Provenance::default() })
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

/// Final scalars, resolved parameters and provenance of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub model_level: String,
    pub scalars: BTreeMap<String, f64>,
    pub resolved: BTreeMap<String, serde_json::Value>,
    pub files: Vec<String>,
    pub notes: Vec<String>,
    pub provenance: Provenance,
}

/// Everything one run writes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutput {
    pub tables: Vec<ResultTable>,
    pub summary: Summary,
}

impl RunOutput {
    pub fn table(&self, name: &str) -> Option<&ResultTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.summary.scalars.get(name).copied()
    }
}

/// Write `<name>.csv` for every table and `summary.json` into `dir`.
pub fn emit_outputs(run: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    for t in &run.tables {
        t.validate()?;
        let path = dir.join(format!("{}.csv", t.name));
        fs::write(&path, t.to_csv()).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    let mut summary = run.summary.clone();
    summary.files = run.tables.iter().map(|t| format!("{}.csv", t.name)).collect();
    if let Some(x) = summary.scalars.values().find(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite summary scalar {x}")));
    }
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    let path = dir.join("summary.json");
    fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;
    written.push(path);
    Ok(written)
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table() -> ResultTable {
        let mut t = ResultTable::new("demo", &[("t", "T"), ("F_bar", "1")], Provenance::for_config("x = 1"));
        t.push(vec![0.0, 0.5]).unwrap();
        t.push(vec![0.1, 1.0 / 3.0]).unwrap();
        t
    }

    #[test]
    fn csv_header_and_rows() {
        let csv = table().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# t:T,F_bar:1"));
        assert_eq!(lines.next(), Some("0.0,0.5"));
        assert_eq!(lines.next(), Some("0.1,0.3333333333333333"));
    }

    #[test]
    fn non_finite_cells_rejected() {
        let mut t = table();
        assert!(t.push(vec![f64::NAN, 1.0]).is_err());
        assert!(t.push(vec![1.0]).is_err());
    }

    #[test]
    fn provenance_is_stable() {
        let a = Provenance::for_config("a = 1");
        assert_eq!(a.config_hash.len(), 64);
        assert_eq!(a.config_hash, Provenance::for_config("a = 1").config_hash);
        assert_ne!(a.config_hash, Provenance::for_config("a = 2").config_hash);
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn emit_writes_csv_and_summary() {
        let dir = std::env::temp_dir().join(format!("nhqc-output-{}", std::process::id()));
        let run = RunOutput { tables: vec![table()], summary: Summary { experiment: "demo".into(), ..Default::default() } };
        let files = emit_outputs(&run, &dir).unwrap();
        assert_eq!(files.len(), 2);
        let back = ResultTable::from_csv("demo", &fs::read_to_string(&files[0]).unwrap()).unwrap();
        assert_eq!(back.rows, table().rows);
        let s: Summary = serde_json::from_str(&fs::read_to_string(&files[1]).unwrap()).unwrap();
        assert_eq!(s.files, ["demo.csv"]);
        fs::remove_dir_all(&dir).unwrap();
    }

    proptest! {
        #[test]
        fn floats_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(format_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
