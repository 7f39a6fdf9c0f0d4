//! Path, label and table files.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use serde::Serialize;
use sigtest::PathStream;

use crate::error::{CliError, CliResult};

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", parent.display())))?;
    }
    File::create(path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn data_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {msg}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    use std::io::Write;
    create(path)?
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

/// Reads `path_id,t,x1,...,xd`; rows of one path must have increasing `t`.
/// Paths keep the order of their first row.
pub fn read_paths(path: &Path) -> CliResult<Vec<PathStream>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let headers = rdr.headers().map_err(|e| data_err(path, e))?.clone();
    if headers.len() < 3 || &headers[0] != "path_id" || &headers[1] != "t" {
        return Err(data_err(path, "header must be path_id,t,x1,...,xd"));
    }
    let dim = headers.len() - 2;
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, (Vec<f64>, Vec<Vec<f64>>)> = HashMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| data_err(path, e))?;
        let num = |i: usize| -> CliResult<f64> {
            rec[i].trim().parse::<f64>().map_err(|_| {
                data_err(
                    path,
                    format!("row {}: {:?} is not a number", line + 2, &rec[i]),
                )
            })
        };
        let t = num(1)?;
        let x = (2..2 + dim).map(num).collect::<CliResult<Vec<f64>>>()?;
        let id = rec[0].to_owned();
        let entry = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            (Vec::new(), Vec::new())
        });
        entry.0.push(t);
        entry.1.push(x);
    }
    if order.is_empty() {
        return Err(data_err(path, "no paths"));
    }
    order
        .into_iter()
        .map(|id| {
            let (t, x) = rows.remove(&id).expect("every id has rows");
            PathStream::new(t, x)
                .map(|p| p.with_id(id.clone()))
                .map_err(|e| data_err(path, format!("path {id}: {e}")))
        })
        .collect()
}

pub fn write_paths(path: &Path, paths: &[PathStream]) -> CliResult<()> {
    let dim = paths.first().map_or(1, |p| p.dim());
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["path_id".to_owned(), "t".to_owned()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    let werr = |e: csv::Error| CliError::Config(format!("cannot write {}: {e}", path.display()));
    w.write_record(&header).map_err(werr)?;
    for (k, p) in paths.iter().enumerate() {
        let id = p.id().map_or_else(|| format!("path-{k}"), str::to_owned);
        for (t, x) in p.times().iter().zip(p.points()) {
            let mut rec = vec![id.clone(), t.to_string()];
            rec.extend(x.iter().map(f64::to_string));
            w.write_record(&rec).map_err(werr)?;
        }
    }
    w.flush().map_err(|e| CliError::Config(e.to_string()))
}

/// Labels aligned with `paths`; accepts 0/1 and true/false.
pub fn read_labels(path: &Path, paths: &[PathStream]) -> CliResult<Vec<bool>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut map = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| data_err(path, e))?;
        if rec.len() != 2 {
            return Err(data_err(path, "rows must be path_id,label"));
        }
        let label = match rec[1].trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(data_err(path, format!("label {other:?} is not 0/1"))),
        };
        map.insert(rec[0].to_owned(), label);
    }
    paths
        .iter()
        .map(|p| {
            let id = p.id().unwrap_or_default();
            map.get(id)
                .copied()
                .ok_or_else(|| data_err(path, format!("no label for path {id}")))
        })
        .collect()
}

pub fn write_labels(path: &Path, paths: &[PathStream], labels: &[bool]) -> CliResult<()> {
    let rows: Vec<LabelRow> = paths
        .iter()
        .zip(labels)
        .map(|(p, &l)| LabelRow {
            path_id: p.id().unwrap_or_default().to_owned(),
            label: u8::from(l),
        })
        .collect();
    write_rows(path, &rows)
}

#[derive(Serialize)]
struct LabelRow {
    path_id: String,
    label: u8,
}

/// One CSV row per item, header from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| CliError::Config(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    write_text(path, &s)
}
