use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Dataset, Label};
use crate::error::{CacError, Result};
use crate::points::PointSet;

/// Where class labels live in an input CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelColumn {
    /// No label column; every column is a coordinate.
    None,
    /// The final column holds integer labels.
    Last,
    /// Final column is a label iff the header names it `label`, `class` or `y`.
    #[default]
    Auto,
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    load_csv_with(path, LabelColumn::Auto)
}

/// Reads points (one per row) with an optional header row.
pub fn load_csv_with(path: &Path, label_column: LabelColumn) -> Result<Dataset> {
    let parse_err = |row: usize, message: String| CacError::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(0, e.to_string()))?;

    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(i + 1, e.to_string()))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        records.push((i + 1, rec));
    }
    if records.is_empty() {
        return Err(parse_err(0, "file contains no rows".into()));
    }

    let first_is_header = records[0].1.iter().any(|c| c.parse::<f64>().is_err());
    let header: Option<Vec<String>> = if first_is_header {
        Some(records[0].1.iter().map(|s| s.to_ascii_lowercase()).collect())
    } else {
        None
    };
    let body = if first_is_header { &records[1..] } else { &records[..] };
    if body.is_empty() {
        return Err(parse_err(records[0].0, "header without data rows".into()));
    }

    let width = body[0].1.len();
    let has_label = match label_column {
        LabelColumn::None => false,
        LabelColumn::Last => true,
        LabelColumn::Auto => header
            .as_ref()
            .and_then(|h| h.last())
            .is_some_and(|name| matches!(name.as_str(), "label" | "class" | "y")),
    };
    let dim = if has_label { width - 1 } else { width };
    if dim == 0 {
        return Err(parse_err(body[0].0, "no coordinate columns".into()));
    }

    let mut coords = Vec::with_capacity(body.len() * dim);
    let mut labels = Vec::with_capacity(if has_label { body.len() } else { 0 });
    for (row, rec) in body {
        if rec.len() != width {
            return Err(parse_err(
                *row,
                format!("ragged row: {} fields, expected {width}", rec.len()),
            ));
        }
        for (c, cell) in rec.iter().take(dim).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(*row, format!("column {}: `{cell}` is not numeric", c + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(*row, format!("column {}: non-finite value", c + 1)));
            }
            coords.push(v);
        }
        if has_label {
            let cell = &rec[dim];
            let l: Label = cell
                .parse::<Label>()
                .or_else(|_| {
                    cell.parse::<f64>()
                        .ok()
                        .filter(|f| f.fract() == 0.0 && *f >= 0.0 && *f <= Label::MAX as f64)
                        .map(|f| f as Label)
                        .ok_or(())
                })
                .map_err(|_| parse_err(*row, format!("label `{cell}` is not a non-negative integer")))?;
            labels.push(l);
        }
    }
    let points = PointSet::new(dim, coords)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    let mut ds = Dataset::new(name, points, has_label.then_some(labels))?;
    ds.provenance = format!("loaded from {}", path.display());
    ds.normalize_labels();
    Ok(ds)
}

/// Reads a two-column `index,label` file (header optional).
pub fn read_labels_csv(path: &Path) -> Result<Vec<(usize, Label)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(CacError::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                message: "expected `index,label`".into(),
            });
        };
        match (a.parse::<usize>(), b.parse::<Label>()) {
            (Ok(idx), Ok(label)) => out.push((idx, label)),
            _ if i == 0 => continue,
            _ => {
                return Err(CacError::Parse {
                    path: path.to_path_buf(),
                    row: i + 1,
                    message: format!("`{line}` is not `index,label`"),
                })
            }
        }
    }
    Ok(out)
}

/// Writes `index, x0..x{q-1}, [truth], predicted, confident`.
///
/// Coordinates are written with 17 significant digits, unassigned predictions
/// as an empty field.
pub fn save_assignments(
    path: &Path,
    points: &PointSet,
    truth: Option<&[Label]>,
    predicted: &[Option<Label>],
    confident: &[bool],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut header = vec!["index".to_string()];
    header.extend((0..points.dim()).map(|d| format!("x{d}")));
    if truth.is_some() {
        header.push("truth".into());
    }
    header.push("predicted".into());
    header.push("confident".into());
    writeln!(w, "{}", header.join(","))?;
    for i in 0..points.len() {
        write!(w, "{i}")?;
        for v in points.row(i) {
            write!(w, ",{v:.16e}")?;
        }
        if let Some(t) = truth {
            write!(w, ",{}", t[i])?;
        }
        match predicted[i] {
            Some(l) => write!(w, ",{l}")?,
            None => write!(w, ",")?,
        }
        writeln!(w, ",{}", u8::from(confident[i]))?;
    }
    w.flush()?;
    Ok(())
}
