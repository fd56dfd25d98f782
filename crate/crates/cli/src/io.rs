//! Artifact writers and readers.
//!
//! CSV files start with a `#`-prefixed JSON metadata line followed by a header row.
//! JSON reports are pretty-printed with sorted keys.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use dissipative_core::model::{Field, Grid, SourceSpec};
use serde::Serialize;
use serde_json::Value;

/// Provenance attached to every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Metadata {
    pub fn new(command: String, config_hash: String, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_hash,
            seed,
        }
    }

    fn line(&self, columns: &[&str]) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        v["columns"] = Value::from(columns.to_vec());
        Ok(format!("# {}", serde_json::to_string(&v)?))
    }
}

/// Canonical form of any serializable value: keys sorted at every level.
pub fn sorted_json<T: Serialize>(value: &T) -> Result<Value> {
    // serde_json's default map is a BTreeMap, so a round-trip through Value sorts keys
    Ok(serde_json::to_value(value)?)
}

pub fn write_json<T: Serialize>(path: &Path, meta: &Metadata, report: &T) -> Result<()> {
    let mut doc = BTreeMap::new();
    doc.insert("metadata", sorted_json(meta)?);
    doc.insert("report", sorted_json(report)?);
    let text = serde_json::to_string_pretty(&doc)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn write_csv<I>(path: &Path, meta: &Metadata, columns: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", meta.line(columns)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns)?;
    for row in rows {
        ensure!(row.len() == columns.len(), "row has {} values, expected {}", row.len(), columns.len());
        w.write_record(row.iter().map(|v| format_value(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip text; scientific notation outside `[1e-4, 1e15)`.
fn format_value(v: f64) -> String {
    let mag = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&mag) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

pub fn write_field_csv(path: &Path, meta: &Metadata, field: &Field<f64>) -> Result<()> {
    let grid = field.grid();
    let rows = grid
        .t()
        .iter()
        .enumerate()
        .flat_map(|(it, &t)| grid.x().iter().enumerate().map(move |(ix, &x)| vec![x, t, field.at(ix, it)]));
    write_csv(path, meta, &["x", "t", "v"], rows)
}

/// Raw CSV writer for tables that already carry their own header (e.g. bound reports).
pub fn write_csv_text(path: &Path, meta: &Metadata, text: &str) -> Result<()> {
    let columns: Vec<&str> = text.lines().next().unwrap_or("").split(',').collect();
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(out, "{}", meta.line(&columns)?)?;
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        writeln!(out)?;
    }
    Ok(())
}

/// Rows of a three-column `(x, t, value)` CSV on a tensor grid, `values[it * nx + ix]`.
struct Table {
    x: Vec<f64>,
    t: Vec<f64>,
    values: Vec<f64>,
}

fn read_table(path: &Path, value_names: &[&str]) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let ix = col("x").with_context(|| format!("{}: missing column `x`", path.display()))?;
    let it = col("t").with_context(|| format!("{}: missing column `t`", path.display()))?;
    let iv = value_names
        .iter()
        .find_map(|n| col(n))
        .with_context(|| format!("{}: missing value column ({})", path.display(), value_names.join(" or ")))?;

    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>()
                .with_context(|| format!("{}: row {}: cannot parse `{s}` as a number", path.display(), line + 1))
        };
        rows.push((get(ix)?, get(it)?, get(iv)?));
    }
    ensure!(!rows.is_empty(), "{}: no data rows", path.display());

    let distinct = |mut v: Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        v.dedup();
        v
    };
    if let Some(bad) = rows.iter().find(|r| !(r.0.is_finite() && r.1.is_finite())) {
        bail!("{}: non-finite coordinate ({}, {})", path.display(), bad.0, bad.1);
    }
    let xs = distinct(rows.iter().map(|r| r.0).collect());
    let ts = distinct(rows.iter().map(|r| r.1).collect());
    ensure!(
        rows.len() == xs.len() * ts.len(),
        "{}: {} rows do not form a tensor grid of {} x nodes and {} t nodes",
        path.display(),
        rows.len(),
        xs.len(),
        ts.len()
    );
    let pos = |v: &[f64], key: f64| v.binary_search_by(|a| a.partial_cmp(&key).expect("finite")).expect("present");
    let mut values = vec![f64::NAN; rows.len()];
    for (x, t, v) in rows {
        let k = pos(&ts, t) * xs.len() + pos(&xs, x);
        ensure!(values[k].is_nan(), "{}: duplicate sample at x = {x}, t = {t}", path.display());
        values[k] = v;
    }
    Ok(Table { x: xs, t: ts, values })
}

/// Reads a field written by [`write_field_csv`]; the time axis must be uniform.
pub fn read_field_csv(path: &Path) -> Result<Field<f64>> {
    let table = read_table(path, &["v"])?;
    ensure!(table.t.len() >= 2, "{}: need at least two time nodes", path.display());
    let steps = table.t.len() - 1;
    let dt = table.t[steps] / steps as f64;
    for (j, &t) in table.t.iter().enumerate() {
        ensure!(
            (t - j as f64 * dt).abs() <= 1e-9 * dt.max(1.0),
            "{}: time nodes are not uniform from 0 (node {j} is {t})",
            path.display()
        );
    }
    let grid = Grid::new(table.x, dt, steps).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Field::new(Arc::new(grid), table.values, label).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Reads a `(x, t, F)` table as a bilinearly interpolated source.
pub fn read_tabulated_source(path: &Path) -> Result<SourceSpec<f64>> {
    ensure!(path.is_file(), "source.name: tabulated file {} does not exist", path.display());
    let table = read_table(path, &["F", "f"])?;
    let label = format!("tabulated:{}", path.display());
    SourceSpec::tabulated(label, table.x, table.t, table.values).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}
