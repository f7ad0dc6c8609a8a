use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Result;
use pavlab::report::fmt_f64;
use serde_json::{Map, Value};

use crate::args::Format;

/// A fixed-column table, used where the CSV layout is prescribed.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Everything a subcommand produced.
pub struct Run {
    pub records: Vec<Value>,
    pub table: Option<Table>,
    pub seeds: Vec<u64>,
    /// Extra files written by the subcommand.
    pub artifacts: Vec<PathBuf>,
    /// Invariant checks that failed; reported after the artifacts are written.
    pub violations: Vec<String>,
}

impl Run {
    pub fn new(records: Vec<Value>, seeds: Vec<u64>) -> Self {
        Self { records, table: None, seeds, artifacts: Vec::new(), violations: Vec::new() }
    }
}

pub fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("elapsed_ms");
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => u.to_string(),
            (_, Some(i), _) => i.to_string(),
            (_, _, Some(f)) => fmt_f64(f),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn flatten_into(prefix: &str, v: &Value, out: &mut Map<String, Value>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_into(&key, x, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

/// Nested objects become dotted columns; arrays stay JSON-encoded in one cell.
/// Columns are the union over records in first-seen order.
fn generic_table(records: &[Value]) -> Table {
    let flat: Vec<Map<String, Value>> = records
        .iter()
        .map(|r| {
            let mut m = Map::new();
            flatten_into("", r, &mut m);
            m
        })
        .collect();
    let mut header: Vec<String> = Vec::new();
    for m in &flat {
        for k in m.keys() {
            if !header.contains(k) {
                header.push(k.clone());
            }
        }
    }
    let rows = flat.iter().map(|m| header.iter().map(|k| m.get(k).map(cell).unwrap_or_default()).collect()).collect();
    Table { header, rows }
}

fn csv_bytes(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn jsonl_bytes(records: &[Value]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Writes the results and the manifest. Returns the results path, if any.
pub fn emit(run: &mut Run, format: Format, out: Option<&PathBuf>, mut manifest: Value, no_timing: bool) -> Result<()> {
    if no_timing {
        run.records.iter_mut().for_each(strip_timing);
        strip_timing(&mut manifest);
    }
    let (body, name) = match format {
        Format::Json => (jsonl_bytes(&run.records)?, "results.jsonl"),
        Format::Csv => {
            let table = match run.table.take() {
                Some(t) => t,
                None => generic_table(&run.records),
            };
            (csv_bytes(&table)?, "results.csv")
        }
    };
    let mut artifacts: Vec<String> = run.artifacts.iter().map(|p| p.display().to_string()).collect();
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), &body)?;
            artifacts.insert(0, name.to_string());
            manifest["artifacts"] = artifacts.into();
            let mut text = serde_json::to_vec_pretty(&manifest)?;
            text.push(b'\n');
            fs::write(dir.join("manifest.json"), text)?;
        }
        None => {
            std::io::stdout().write_all(&body)?;
            manifest["artifacts"] = artifacts.into();
            eprintln!("{}", serde_json::to_string(&manifest)?);
        }
    }
    Ok(())
}
