//! CSV and JSON readers/writers for datasets, predictions, reports and
//! plot tables.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! yields bit-identical values.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::calibration::{AdversarialCurve, CalibrationCurve};
use crate::data::{DataError, LabeledDataset, PredictionSet};

pub const PREDICTION_HEADER: [&str; 4] = ["id", "y_true", "y_pred", "sigma"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{}: invalid JSON: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {source}", path.display())]
    Data {
        path: PathBuf,
        #[source]
        source: DataError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> IoError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => IoError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => IoError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Shortest decimal string that parses back to exactly `v`.
pub fn format_f64(v: f64) -> String {
    let mut buf = ryu::Buffer::new();
    buf.format(v).to_string()
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new().from_writer(create(path)?);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

struct Table {
    header: Vec<String>,
    /// Each row with the 1-based file line it came from.
    rows: Vec<(u64, csv::StringRecord)>,
}

fn read_table(path: &Path) -> Result<Table, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    Ok(Table { header, rows })
}

fn parse_f64(path: &Path, line: u64, column: &str, raw: &str) -> Result<f64, IoError> {
    let v: f64 = raw.trim().parse().map_err(|_| IoError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("column `{column}`: `{raw}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(IoError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("column `{column}`: non-finite value `{raw}`"),
        });
    }
    Ok(v)
}

fn header_error(path: &Path, expected: &str, found: &[String]) -> IoError {
    IoError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: format!("expected header `{expected}`, found `{}`", found.join(",")),
    }
}

/// Dataset header: `id,x0,…,x{d−1},y[,group][,true_sigma]`.
pub fn dataset_header(d: &LabeledDataset, dim: usize) -> Vec<String> {
    let mut h = vec!["id".to_string()];
    h.extend((0..dim).map(|j| format!("x{j}")));
    h.push("y".into());
    if d.groups.is_some() {
        h.push("group".into());
    }
    if d.true_sigma.is_some() {
        h.push("true_sigma".into());
    }
    h
}

/// Writes a dataset. `dim` fixes the feature columns, which matters only
/// when the dataset has no rows.
pub fn write_dataset(path: &Path, d: &LabeledDataset, dim: usize) -> Result<(), IoError> {
    let rows = (0..d.len()).map(|i| {
        let mut r = vec![d.ids[i].clone()];
        r.extend(d.features[i].iter().map(|v| format_f64(*v)));
        r.push(format_f64(d.targets[i]));
        if let Some(g) = &d.groups {
            r.push(g[i].clone());
        }
        if let Some(s) = &d.true_sigma {
            r.push(format_f64(s[i]));
        }
        r
    });
    write_rows(path, &dataset_header(d, dim), rows)
}

/// Reads a dataset CSV. A file with a header and no rows gives an empty
/// dataset.
pub fn read_dataset(path: &Path) -> Result<LabeledDataset, IoError> {
    let t = read_table(path)?;
    let h = &t.header;
    let expected = "id,x0..x{d-1},y[,group][,true_sigma]";
    if h.first().map(String::as_str) != Some("id") {
        return Err(header_error(path, expected, h));
    }
    let dim = h[1..].iter().take_while(|c| c.starts_with('x')).count();
    let features_ok = (0..dim).all(|j| h[1 + j] == format!("x{j}"));
    if dim == 0 || !features_ok || h.get(1 + dim).map(String::as_str) != Some("y") {
        return Err(header_error(path, expected, h));
    }
    let mut rest: Vec<&str> = h[2 + dim..].iter().map(String::as_str).collect();
    let has_sigma = rest.last() == Some(&"true_sigma");
    if has_sigma {
        rest.pop();
    }
    let has_group = match rest.as_slice() {
        [] => false,
        ["group"] => true,
        _ => return Err(header_error(path, expected, h)),
    };

    let n = t.rows.len();
    let mut d = LabeledDataset {
        ids: Vec::with_capacity(n),
        features: Vec::with_capacity(n),
        targets: Vec::with_capacity(n),
        groups: has_group.then(|| Vec::with_capacity(n)),
        true_sigma: has_sigma.then(|| Vec::with_capacity(n)),
    };
    for (line, rec) in &t.rows {
        if rec.len() != h.len() {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line: *line,
                message: format!("expected {} fields, found {}", h.len(), rec.len()),
            });
        }
        d.ids.push(rec[0].to_string());
        let x = (0..dim)
            .map(|j| parse_f64(path, *line, &h[1 + j], &rec[1 + j]))
            .collect::<Result<Vec<_>, _>>()?;
        d.features.push(x);
        d.targets.push(parse_f64(path, *line, "y", &rec[1 + dim])?);
        if let Some(g) = d.groups.as_mut() {
            g.push(rec[2 + dim].to_string());
        }
        if let Some(s) = d.true_sigma.as_mut() {
            s.push(parse_f64(path, *line, "true_sigma", &rec[rec.len() - 1])?);
        }
    }
    if !d.is_empty() {
        d.validate().map_err(|source| IoError::Data {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(d)
}

pub fn write_predictions(path: &Path, p: &PredictionSet) -> Result<(), IoError> {
    let mut header: Vec<String> = PREDICTION_HEADER.iter().map(|s| s.to_string()).collect();
    if p.groups.is_some() {
        header.push("group".into());
    }
    let rows = (0..p.len()).map(|i| {
        let mut r = vec![
            p.ids[i].clone(),
            format_f64(p.y_true[i]),
            format_f64(p.mu[i]),
            format_f64(p.sigma[i]),
        ];
        if let Some(g) = &p.groups {
            r.push(g[i].clone());
        }
        r
    });
    write_rows(path, &header, rows)
}

/// Reads `id,y_true,y_pred,sigma[,group]` and validates the result.
pub fn read_predictions(path: &Path) -> Result<PredictionSet, IoError> {
    let t = read_table(path)?;
    let h: Vec<&str> = t.header.iter().map(String::as_str).collect();
    let has_group = match h.as_slice() {
        ["id", "y_true", "y_pred", "sigma"] => false,
        ["id", "y_true", "y_pred", "sigma", "group"] => true,
        _ => return Err(header_error(path, "id,y_true,y_pred,sigma[,group]", &t.header)),
    };
    let n = t.rows.len();
    let mut p = PredictionSet {
        ids: Vec::with_capacity(n),
        y_true: Vec::with_capacity(n),
        mu: Vec::with_capacity(n),
        sigma: Vec::with_capacity(n),
        groups: has_group.then(|| Vec::with_capacity(n)),
    };
    for (line, rec) in &t.rows {
        if rec.len() != h.len() {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line: *line,
                message: format!("expected {} fields, found {}", h.len(), rec.len()),
            });
        }
        p.ids.push(rec[0].to_string());
        p.y_true.push(parse_f64(path, *line, "y_true", &rec[1])?);
        p.mu.push(parse_f64(path, *line, "y_pred", &rec[2])?);
        p.sigma.push(parse_f64(path, *line, "sigma", &rec[3])?);
        if let Some(g) = p.groups.as_mut() {
            g.push(rec[4].to_string());
        }
    }
    p.validate().map_err(|source| IoError::Data {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(p)
}

/// `expected,observed`, one row per grid point.
pub fn write_calibration_curve(path: &Path, c: &CalibrationCurve) -> Result<(), IoError> {
    let rows = c
        .expected
        .iter()
        .zip(&c.observed)
        .map(|(e, o)| vec![format_f64(*e), format_f64(*o)]);
    write_rows(path, &["expected".into(), "observed".into()], rows)
}

/// `fraction,mean_worst_area,std_error`, one row per group fraction.
pub fn write_adversarial_curve(path: &Path, c: &AdversarialCurve) -> Result<(), IoError> {
    let rows = (0..c.group_fractions.len()).map(|i| {
        vec![
            format_f64(c.group_fractions[i]),
            format_f64(c.mean_worst_area[i]),
            format_f64(c.std_error[i]),
        ]
    });
    let header = ["fraction", "mean_worst_area", "std_error"].map(String::from);
    write_rows(path, &header, rows)
}

/// `value,density` pairs of a kernel density estimate.
pub fn write_density(path: &Path, values: &[f64], density: &[f64]) -> Result<(), IoError> {
    let rows = values
        .iter()
        .zip(density)
        .map(|(v, d)| vec![format_f64(*v), format_f64(*d)]);
    write_rows(path, &["value".into(), "density".into()], rows)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}
