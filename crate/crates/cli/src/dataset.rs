//! Tabular outputs and the JSON manifest that describes a run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    F64,
    Int,
    Str,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::F(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Self::I(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Self::I(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Self::I(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Self::S(x.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

/// One CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// File name inside the output directory.
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    /// Per-file facts recorded in the manifest.
    pub meta: Map<String, Value>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, columns: &[(&str, ColumnType)]) -> Self {
        Self {
            name: name.into(),
            columns: columns
                .iter()
                .map(|(n, ty)| Column {
                    name: n.to_string(),
                    ty: *ty,
                })
                .collect(),
            rows: Vec::new(),
            meta: Map::new(),
        }
    }

    /// Shorthand for all-float tables.
    pub fn floats(name: impl Into<String>, columns: &[&str]) -> Self {
        let cols: Vec<(&str, ColumnType)> = columns.iter().map(|c| (*c, ColumnType::F64)).collect();
        Self::new(name, &cols)
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width differs from header in {}",
            self.name
        );
        for (cell, col) in row.iter().zip(&self.columns) {
            let ok = matches!(
                (cell, col.ty),
                (Cell::F(_), ColumnType::F64) | (Cell::I(_), ColumnType::Int) | (Cell::S(_), ColumnType::Str)
            );
            assert!(ok, "cell type differs from column `{}` in {}", col.name, self.name);
        }
        self.rows.push(row);
    }

    pub fn push_floats(&mut self, row: &[f64]) {
        self.push(row.iter().map(|x| Cell::F(*x)).collect());
    }

    pub fn with_meta(mut self, key: &str, value: impl Serialize) -> Self {
        self.meta.insert(
            key.to_string(),
            serde_json::to_value(value).expect("metadata serializes"),
        );
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::F(x) => out.push_str(&format_f64(*x)),
                    Cell::I(x) => write!(out, "{x}").unwrap(),
                    Cell::S(s) => out.push_str(s),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// Everything a subcommand produced, before it touches the disk.
#[derive(Clone, Debug, Default)]
pub struct Output {
    pub datasets: Vec<Dataset>,
    /// Scalars summarizing the run.
    pub results: Map<String, Value>,
}

impl Output {
    pub fn add(&mut self, d: Dataset) {
        self.datasets.push(d);
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        self.results
            .insert(key.to_string(), serde_json::to_value(value).expect("result serializes"));
    }
}

#[derive(Serialize)]
struct FileEntry<'a> {
    name: &'a str,
    rows: usize,
    columns: &'a [Column],
    #[serde(skip_serializing_if = "Map::is_empty")]
    meta: &'a Map<String, Value>,
}

/// Git-style object hash of the resolved configuration.
pub fn input_hash(config: &Value) -> String {
    let body = serde_json::to_string(config).expect("config serializes");
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()));
    h.update(body.as_bytes());
    format!("{:x}", h.finalize())
}

pub fn manifest(command: &str, config: &Value, out: &Output) -> Value {
    let files: Vec<Value> = out
        .datasets
        .iter()
        .map(|d| {
            serde_json::to_value(FileEntry {
                name: &d.name,
                rows: d.rows.len(),
                columns: &d.columns,
                meta: &d.meta,
            })
            .expect("file entry serializes")
        })
        .collect();
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "tool": "clickdyn",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "input_hash": input_hash(config),
        "files": files,
        "results": out.results,
    })
}

/// Companion gnuplot script plotting the first column against the others.
pub fn plot_script(d: &Dataset) -> String {
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\nplot ");
    let numeric: Vec<usize> = d
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.ty == ColumnType::F64)
        .map(|(i, _)| i + 1)
        .collect();
    let first = numeric.first().copied().unwrap_or(1);
    let series: Vec<String> = numeric
        .iter()
        .skip(1)
        .map(|c| format!("'{}' using {first}:{c} with lines", d.name))
        .collect();
    s.push_str(&series.join(", \\\n     "));
    s.push('\n');
    s
}

/// Write every dataset plus the manifest; on failure remove what was
/// written unless `keep_partial`.
pub fn write_all(
    dir: &Path,
    command: &str,
    config: &Value,
    out: &Output,
    plot_scripts: bool,
    keep_partial: bool,
) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let result = write_inner(dir, command, config, out, plot_scripts, &mut written);
    if result.is_err() && !keep_partial {
        for p in &written {
            let _ = std::fs::remove_file(p);
        }
    }
    result.map(|_| written)
}

fn write_file(path: PathBuf, body: &str, written: &mut Vec<PathBuf>) -> Result<(), CliError> {
    std::fs::write(&path, body).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(())
}

fn write_inner(
    dir: &Path,
    command: &str,
    config: &Value,
    out: &Output,
    plot_scripts: bool,
    written: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for d in &out.datasets {
        write_file(dir.join(&d.name), &d.to_csv(), written)?;
        if plot_scripts {
            write_file(dir.join(format!("{}.gp", d.name)), &plot_script(d), written)?;
        }
    }
    let mut text = serde_json::to_string_pretty(&manifest(command, config, out)).expect("manifest serializes");
    text.push('\n');
    write_file(dir.join(MANIFEST_NAME), &text, written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_layout() {
        let mut d = Dataset::new(
            "t.csv",
            &[
                ("x", ColumnType::F64),
                ("kind", ColumnType::Str),
                ("n", ColumnType::Int),
            ],
        );
        d.push(vec![0.1.into(), "saddle".into(), 3usize.into()]);
        d.push(vec![f64::NAN.into(), "center".into(), (-1i64).into()]);
        assert_eq!(d.to_csv(), "x,kind,n\n1.0000000000000001e-1,saddle,3\nnan,center,-1\n");
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn ragged_rows_are_rejected() {
        let mut d = Dataset::floats("t.csv", &["a", "b"]);
        d.push_floats(&[1.0]);
    }

    #[test]
    fn manifest_counts_rows() {
        let mut out = Output::default();
        let mut d = Dataset::floats("a.csv", &["x"]);
        d.push_floats(&[1.0]);
        d.push_floats(&[2.0]);
        out.add(d);
        let m = manifest("energy", &serde_json::json!({"alpha": 1.0}), &out);
        assert_eq!(m["files"][0]["rows"], 2);
        assert_eq!(m["schema_version"], SCHEMA_VERSION);
        assert_eq!(m["input_hash"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn failed_write_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Output::default();
        out.add(Dataset::floats("a.csv", &["x"]));
        // a directory where a file must go
        out.add(Dataset::floats("blocked", &["x"]));
        std::fs::create_dir(dir.path().join("blocked")).unwrap();
        let err = write_all(dir.path(), "energy", &Value::Null, &out, false, false).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert!(!dir.path().join("a.csv").exists());
        let err = write_all(dir.path(), "energy", &Value::Null, &out, false, true).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert!(dir.path().join("a.csv").exists());
    }

    proptest! {
        #[test]
        fn floats_round_trip_bit_exactly(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            let back: f64 = format_f64(x).parse().unwrap();
            if x.is_nan() {
                prop_assert!(back.is_nan());
            } else {
                prop_assert_eq!(back.to_bits(), x.to_bits());
            }
        }
    }
}
