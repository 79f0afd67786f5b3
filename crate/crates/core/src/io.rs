//! CSV and JSON file formats.
//!
//! Lengths are in millimetres. Floats are written in shortest round-trip
//! form, so identical values always produce identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::geometry::{BiofilmSide, InterfaceCurve, MeasurementRay, Point2};
use crate::lmsolver::TraceRecord;
use crate::models::SurfaceLoadSample;
use crate::synth::LevelSummary;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.to_path_buf(), source }
}

fn format_err(path: &Path, msg: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a header and rows with the csv writer.
pub fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_rows(path: &Path, expected: &[&str]) -> Result<Vec<Vec<f64>>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(format_err(path, format!("expected columns {expected:?}, found {got:?}")));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format_err(path, format!("row {}: {e}", i + 1)))?;
        out.push(row);
    }
    Ok(out)
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub const CURVE_COLUMNS: [&str; 2] = ["x_mm", "y_mm"];
pub const RAY_COLUMNS: [&str; 5] = ["ox_mm", "oy_mm", "dx", "dy", "max_length_mm"];
pub const LOAD_COLUMNS: [&str; 7] = ["x_mm", "y_mm", "nx", "ny", "h", "snn", "snt"];

/// Orientation metadata stored next to a curve CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub closed: bool,
    pub biofilm_side: BiofilmSide,
}

/// `interface.csv` → `interface.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_curve_csv(path: &Path, curve: &InterfaceCurve<f64>) -> Result<(), IoError> {
    let header: Vec<String> = CURVE_COLUMNS.iter().map(|s| s.to_string()).collect();
    write_csv(path, &header, curve.vertices().iter().map(|p| vec![num(p.x), num(p.y)]))
}

/// Writes the curve CSV and its orientation sidecar.
pub fn write_curve(path: &Path, curve: &InterfaceCurve<f64>) -> Result<(), IoError> {
    write_curve_csv(path, curve)?;
    write_json(
        &sidecar_path(path),
        &CurveMeta {
            closed: curve.is_closed(),
            biofilm_side: curve.biofilm_side(),
        },
    )
}

/// Reads a curve; a missing sidecar means an open curve with the biofilm on the right.
pub fn read_curve(path: &Path) -> Result<InterfaceCurve<f64>, IoError> {
    let rows = read_rows(path, &CURVE_COLUMNS)?;
    let side = sidecar_path(path);
    let meta = if side.exists() {
        read_json(&side)?
    } else {
        CurveMeta {
            closed: false,
            biofilm_side: BiofilmSide::Right,
        }
    };
    let pts = rows.iter().map(|r| Point2::new(r[0], r[1])).collect();
    InterfaceCurve::new(pts, meta.closed, meta.biofilm_side).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_rays_csv(path: &Path, rays: &[MeasurementRay<f64>]) -> Result<(), IoError> {
    let header: Vec<String> = RAY_COLUMNS.iter().map(|s| s.to_string()).collect();
    write_csv(
        path,
        &header,
        rays.iter().map(|r| {
            vec![
                num(r.origin.x),
                num(r.origin.y),
                num(r.direction.x),
                num(r.direction.y),
                num(r.max_length),
            ]
        }),
    )
}

pub fn read_rays_csv(path: &Path) -> Result<Vec<MeasurementRay<f64>>, IoError> {
    read_rows(path, &RAY_COLUMNS)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            MeasurementRay::new(Point2::new(r[0], r[1]), Point2::new(r[2], r[3]), r[4])
                .map_err(|e| format_err(path, format!("ray {i}: {e}")))
        })
        .collect()
}

pub fn write_load_samples_csv(path: &Path, samples: &[SurfaceLoadSample<f64>]) -> Result<(), IoError> {
    let header: Vec<String> = LOAD_COLUMNS.iter().map(|s| s.to_string()).collect();
    write_csv(
        path,
        &header,
        samples.iter().map(|s| {
            vec![
                num(s.position.x),
                num(s.position.y),
                num(s.normal.x),
                num(s.normal.y),
                num(s.flux_h),
                num(s.sigma_nn),
                num(s.sigma_nt),
            ]
        }),
    )
}

pub fn read_load_samples_csv(path: &Path) -> Result<Vec<SurfaceLoadSample<f64>>, IoError> {
    read_rows(path, &LOAD_COLUMNS)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let s = SurfaceLoadSample {
                position: Point2::new(r[0], r[1]),
                normal: Point2::new(r[2], r[3]),
                flux_h: r[4],
                sigma_nn: r[5],
                sigma_nt: r[6],
            };
            s.validate().map_err(|e| format_err(path, format!("sample {i}: {e}")))?;
            Ok(s)
        })
        .collect()
}

/// Header of a trace CSV: `k,status,mu,err_res_mm,err_grad,<params>`.
pub fn trace_header(names: &[String]) -> Vec<String> {
    let mut h: Vec<String> = ["k", "status", "mu", "err_res_mm", "err_grad"].iter().map(|s| s.to_string()).collect();
    h.extend(names.iter().cloned());
    h
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// One row per trace record; parameters are the iterate `xᵏ`.
pub fn write_trace_csv(path: &Path, names: &[String], trace: &[TraceRecord<f64>]) -> Result<(), IoError> {
    write_csv(
        path,
        &trace_header(names),
        trace.iter().map(|t| {
            let mut row = vec![
                t.k.to_string(),
                t.status.as_str().to_string(),
                num(t.mu),
                opt(t.err_res),
                opt(t.err_grad),
            ];
            row.extend(t.x.iter().map(|v| num(*v)));
            row
        }),
    )
}

/// A trace row read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub status: String,
    pub mu: f64,
    pub err_res: Option<f64>,
    pub err_grad: Option<f64>,
    pub params: Vec<f64>,
}

pub fn read_trace_csv(path: &Path) -> Result<(Vec<String>, Vec<TraceRow>), IoError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(String::from).collect();
    let fixed = trace_header(&[]);
    if header.len() < fixed.len() || header[..fixed.len()] != fixed[..] {
        return Err(format_err(path, format!("not a trace file (columns {header:?})")));
    }
    let names = header[fixed.len()..].to_vec();
    let parse = |s: &str, i: usize| -> Result<f64, IoError> {
        s.parse::<f64>().map_err(|e| format_err(path, format!("row {}: {e}", i + 1)))
    };
    let parse_opt = |s: &str, i: usize| -> Result<Option<f64>, IoError> {
        if s.is_empty() {
            Ok(None)
        } else {
            parse(s, i).map(Some)
        }
    };
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let f: Vec<&str> = rec.iter().collect();
        if f.len() != header.len() {
            return Err(format_err(path, format!("row {} has {} fields", i + 1, f.len())));
        }
        rows.push(TraceRow {
            k: f[0].parse().map_err(|e| format_err(path, format!("row {}: {e}", i + 1)))?,
            status: f[1].to_string(),
            mu: parse(f[2], i)?,
            err_res: parse_opt(f[3], i)?,
            err_grad: parse_opt(f[4], i)?,
            params: f[5..].iter().map(|s| parse(s, i)).collect::<Result<_, _>>()?,
        });
    }
    Ok((names, rows))
}

/// Campaign summary: one row per noise level.
pub fn write_summary_csv(path: &Path, names: &[String], summary: &[LevelSummary]) -> Result<(), IoError> {
    let mut header: Vec<String> = ["sigma_mm", "mean_err_res_mm", "std_err_res_mm"].iter().map(|s| s.to_string()).collect();
    for n in names {
        header.push(format!("mean_{n}"));
        header.push(format!("std_{n}"));
    }
    header.push("n_completed".into());
    header.push("n_failed".into());
    write_csv(
        path,
        &header,
        summary.iter().map(|s| {
            let mut row = vec![num(s.sigma), num(s.mean_err_res), num(s.std_err_res)];
            for (m, d) in s.mean_params.iter().zip(&s.std_params) {
                row.push(num(*m));
                row.push(num(*d));
            }
            row.push(s.n_completed.to_string());
            row.push(s.n_failed.to_string());
            row
        }),
    )
}

/// Writes `bytes` atomically: a temporary sibling is renamed into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}
