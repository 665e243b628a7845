//! CSV/JSON artifact writers. Every file opens with the job name, the
//! SHA-256 of the config text and the seed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::OutputFormat;
use crate::error::Result;

/// `%.12g`-style rendering: 12 significant digits, trailing zeros trimmed.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(format!("{v:.decimals$}"))
    } else {
        let s = format!("{v:.11e}");
        let (mantissa, e) = s.split_once('e').unwrap();
        format!("{}e{}", trim(mantissa.to_string()), e)
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl Field {
    fn csv(&self) -> String {
        match self {
            Field::Num(v) => fmt_num(*v),
            Field::Int(i) => i.to_string(),
            Field::Text(s) => s.clone(),
            Field::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Field::Num(v) if v.is_finite() => json!(v),
            Field::Num(v) => json!(fmt_num(*v)),
            Field::Int(i) => json!(i),
            Field::Text(s) => json!(s),
            Field::Bool(b) => json!(b),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Provenance stamped on every artifact.
#[derive(Debug, Clone)]
pub struct Stamp {
    pub job: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Stamp {
    fn header(&self) -> String {
        format!(
            "# mmfa {}\n# config_sha256: {}\n# seed: {}\n",
            self.job, self.config_sha256, self.seed
        )
    }
}

pub struct Writer {
    dir: PathBuf,
    format: OutputFormat,
    stamp: Stamp,
    pub written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path, format: OutputFormat, stamp: Stamp) -> Result<Writer> {
        fs::create_dir_all(dir)?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            format,
            stamp,
            written: Vec::new(),
        })
    }

    /// Writes `<stem>.csv` or `<stem>.json` depending on the format.
    pub fn table(&mut self, stem: &str, table: &Table) -> Result<()> {
        match self.format {
            OutputFormat::Csv => {
                let mut out = self.stamp.header();
                out.push_str(&table.columns.join(","));
                out.push('\n');
                for row in &table.rows {
                    let cells: Vec<String> = row.iter().map(Field::csv).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                self.write(&format!("{stem}.csv"), &out)
            }
            OutputFormat::Json => {
                let rows: Vec<Value> = table
                    .rows
                    .iter()
                    .map(|row| {
                        Value::Object(
                            table
                                .columns
                                .iter()
                                .cloned()
                                .zip(row.iter().map(Field::json))
                                .collect(),
                        )
                    })
                    .collect();
                self.json_file(stem, json!({ "columns": table.columns, "rows": rows }))
            }
        }
    }

    /// Structured summary, always JSON.
    pub fn summary<T: Serialize>(&mut self, stem: &str, body: &T) -> Result<()> {
        let value = serde_json::to_value(body).map_err(|e| crate::Error::Io(e.to_string()))?;
        self.json_file(stem, value)
    }

    fn json_file(&mut self, stem: &str, body: Value) -> Result<()> {
        let doc = json!({
            "job": self.stamp.job,
            "config_sha256": self.stamp.config_sha256,
            "seed": self.stamp.seed,
            "data": body,
        });
        let text =
            serde_json::to_string_pretty(&doc).map_err(|e| crate::Error::Io(e.to_string()))?;
        self.write(&format!("{stem}.json"), &(text + "\n"))
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }
}
