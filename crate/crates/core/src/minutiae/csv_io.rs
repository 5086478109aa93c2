//! Minutiae tables as CSV.
//!
//! End-point files have columns `x,angle` and optionally `y`; bifurcation
//! files have `x,angle1,angle2,angle3` and optionally `y`. Columns are
//! located by header name, so their order is free.

use std::io::{Read, Write};
use std::path::Path;

use super::{round2, BifurcationPoint, EndPoint, MinutiaeSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MinutiaKind {
    Ending,
    Bifurcation,
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        what: "csv",
        line,
        message: message.into(),
    }
}

/// Shortest decimal form of a two-decimal angle: `-1.05`, `0`, `3.14`.
pub(crate) fn format_angle(a: f64) -> String {
    round2(a).to_string()
}

pub fn read_minutiae_csv(path: impl AsRef<Path>) -> Result<MinutiaeSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_minutiae(file)
}

/// Parses one per-kind table; the kind is inferred from the header.
pub fn read_minutiae<R: Read>(reader: R) -> Result<MinutiaeSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| format_err(1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));

    let kind = if col("angle1").is_some() || col("angle2").is_some() || col("angle3").is_some() {
        MinutiaKind::Bifurcation
    } else {
        MinutiaKind::Ending
    };
    let required: &[&str] = match kind {
        MinutiaKind::Ending => &["x", "angle"],
        MinutiaKind::Bifurcation => &["x", "angle1", "angle2", "angle3"],
    };
    let mut idx = Vec::with_capacity(required.len());
    for name in required {
        idx.push(col(name).ok_or_else(|| format_err(1, format!("missing column {name:?}")))?);
    }
    let y_col = col("y");

    let mut set = MinutiaeSet::default();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            format_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let real = |i: usize, name: &str| -> Result<f64> {
            let cell = record.get(i).unwrap_or("");
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format_err(line, format!("column {name}: invalid number {cell:?}")))
        };
        let pixel = |i: usize, name: &str| -> Result<i32> {
            let v = real(i, name)?;
            if v.fract() != 0.0 || v.abs() > i32::MAX as f64 {
                return Err(format_err(line, format!("column {name}: {v} is not a pixel coordinate")));
            }
            Ok(v as i32)
        };
        let y = match y_col {
            Some(i) if !record.get(i).unwrap_or("").is_empty() => Some(pixel(i, "y")?),
            _ => None,
        };
        let x = pixel(idx[0], "x")?;
        match kind {
            MinutiaKind::Ending => set.endings.push(EndPoint {
                x,
                y,
                angle: round2(real(idx[1], "angle")?),
            }),
            MinutiaKind::Bifurcation => set.bifurcations.push(BifurcationPoint {
                x,
                y,
                angle1: round2(real(idx[1], "angle1")?),
                angle2: round2(real(idx[2], "angle2")?),
                angle3: round2(real(idx[3], "angle3")?),
            }),
        }
    }
    set.canonicalize();
    Ok(set)
}

fn write_table<W: Write>(out: W, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    let io = |e: csv::Error| Error::Io {
        path: Default::default(),
        source: std::io::Error::other(e.to_string()),
    };
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: Default::default(),
        source: e,
    })
}

fn y_cell(y: Option<i32>) -> String {
    y.map(|v| v.to_string()).unwrap_or_default()
}

/// The `y` column is written when any point has a row, and for an empty
/// list.
pub fn write_endings<W: Write>(points: &[EndPoint], out: W) -> Result<()> {
    let with_y = points.is_empty() || points.iter().any(|p| p.y.is_some());
    let header: &[&str] = if with_y { &["x", "angle", "y"] } else { &["x", "angle"] };
    let rows = points
        .iter()
        .map(|p| {
            let mut row = vec![p.x.to_string(), format_angle(p.angle)];
            if with_y {
                row.push(y_cell(p.y));
            }
            row
        })
        .collect();
    write_table(out, header, rows)
}

pub fn write_bifurcations<W: Write>(points: &[BifurcationPoint], out: W) -> Result<()> {
    let with_y = points.is_empty() || points.iter().any(|p| p.y.is_some());
    let header: &[&str] = if with_y {
        &["x", "angle1", "angle2", "angle3", "y"]
    } else {
        &["x", "angle1", "angle2", "angle3"]
    };
    let rows = points
        .iter()
        .map(|p| {
            let mut row = vec![
                p.x.to_string(),
                format_angle(p.angle1),
                format_angle(p.angle2),
                format_angle(p.angle3),
            ];
            if with_y {
                row.push(y_cell(p.y));
            }
            row
        })
        .collect();
    write_table(out, header, rows)
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_endings_csv(points: &[EndPoint], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), |b| write_endings(points, b))
}

pub fn write_bifurcations_csv(points: &[BifurcationPoint], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), |b| write_bifurcations(points, b))
}
