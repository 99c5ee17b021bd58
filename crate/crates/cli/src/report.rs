//! Run reports: one JSON document plus CSV (and gnuplot `.dat`) artifacts
//! carrying the same numbers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mlsm_core::{Error, Result};
use serde::Serialize;

/// Non-finite values serialize as JSON `null` and as `inf`/`nan` in CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_none()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub id: String,
    pub values: BTreeMap<String, Num>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub deterministic: bool,
    pub rows: Vec<Row>,
    pub means: BTreeMap<String, Num>,
    /// Omitted (`null`) in deterministic mode so reruns stay bit-identical.
    pub wall_time_s: Option<f64>,
}

impl RunReport {
    pub fn new(command: &str, deterministic: bool) -> Self {
        RunReport {
            command: command.into(),
            config: BTreeMap::new(),
            seeds: BTreeMap::new(),
            deterministic,
            rows: Vec::new(),
            means: BTreeMap::new(),
            wall_time_s: None,
        }
    }

    pub fn config_text(&mut self, text: &str) {
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                self.config.insert(k.trim().into(), v.trim().into());
            }
        }
    }

    pub fn row(&mut self, id: impl Into<String>, values: &[(&str, f64)]) {
        let values = values.iter().map(|(k, v)| (k.to_string(), Num(*v))).collect();
        self.rows.push(Row { id: id.into(), values });
    }

    pub fn mean(&mut self, key: &str, value: f64) {
        self.means.insert(key.into(), Num(value));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable") + "\n"
    }

    /// `id,<columns…>` with the union of all row keys as columns.
    pub fn rows_csv(&self) -> String {
        let mut cols: Vec<&String> = self.rows.iter().flat_map(|r| r.values.keys()).collect();
        cols.sort();
        cols.dedup();
        let mut s = String::from("id");
        for c in &cols {
            let _ = write!(s, ",{}", c);
        }
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.id);
            for c in &cols {
                match r.values.get(*c) {
                    Some(v) => {
                        let _ = write!(s, ",{}", v.0);
                    }
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }

    /// `key,value` for means and, when present, the wall time.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("key,value\n");
        for (k, v) in &self.means {
            let _ = writeln!(s, "{},{}", k, v.0);
        }
        if let Some(t) = self.wall_time_s {
            let _ = writeln!(s, "wall_time_s,{}", t);
        }
        s
    }

    /// Writes `report.json`, `rows.csv` and `summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        write(&dir.join("report.json"), &self.to_json())?;
        write(&dir.join("rows.csv"), &self.rows_csv())?;
        write(&dir.join("summary.csv"), &self.summary_csv())
    }
}

pub fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source: e }
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io(path, e))
}

/// Whitespace-separated columns with a `#` header line, for gnuplot.
pub fn dat(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = format!("# {}\n", header.join(" "));
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    s
}
