//! Delimited numeric input and per-feature scaling.

use std::path::Path;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// Integers select by zero-based position, anything else by header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    /// d×N, one column per observation.
    pub data: Array2<f64>,
    pub truth: Option<Vec<String>>,
    pub feature_names: Option<Vec<String>>,
    /// Zero-based data-row position of every retained observation.
    pub row_indices: Vec<usize>,
    /// Rows skipped for missing values.
    pub dropped_rows: usize,
    /// Original feature positions removed for zero variance.
    pub dropped_features: Vec<usize>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.to_ascii_lowercase().as_str(), "" | "na" | "nan" | "?")
}

fn ingest_err(row: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Ingest {
        row,
        column,
        message: message.into(),
    }
}

/// Reads a comma-delimited file, drops rows with missing values and divides
/// every feature by its sample standard deviation. Means are kept.
pub fn load_and_standardize(path: impl AsRef<Path>, label: Option<&LabelColumn>) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => ingest_err(0, 0, format!("{other:?}")),
        })?;
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| ingest_err(i + 1, 0, e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push((i + 1, rec.iter().map(str::to_string).collect::<Vec<_>>()));
    }
    if records.is_empty() {
        return Err(Error::EmptyData);
    }
    let width = records[0].1.len();

    let first = &records[0].1;
    let named = matches!(label, Some(LabelColumn::Name(_)));
    let label_guess = match label {
        Some(LabelColumn::Index(i)) => Some(*i),
        _ => None,
    };
    let has_header = named
        || first
            .iter()
            .enumerate()
            .any(|(c, cell)| Some(c) != label_guess && !is_missing(cell) && cell.parse::<f64>().is_err());
    let header = has_header.then(|| records.remove(0).1);
    let label_idx = match label {
        None => None,
        Some(LabelColumn::Index(i)) => {
            if *i >= width {
                return Err(Error::Config(format!("label column {i} out of range for {width} columns")));
            }
            Some(*i)
        }
        Some(LabelColumn::Name(n)) => {
            let h = header.as_ref().expect("named label implies header");
            Some(
                h.iter()
                    .position(|c| c == n)
                    .ok_or_else(|| Error::Config(format!("no column named '{n}'")))?,
            )
        }
    };
    let feature_cols: Vec<usize> = (0..width).filter(|&c| Some(c) != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(Error::DegenerateData("no feature columns".into()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut truth = Vec::new();
    let mut dropped_rows = 0;
    let mut row_indices = Vec::new();
    'rows: for (pos, (line, rec)) in records.iter().enumerate() {
        if rec.len() != width {
            return Err(ingest_err(*line, rec.len(), format!("expected {width} fields, found {}", rec.len())));
        }
        let mut vals = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let cell = &rec[c];
            if is_missing(cell) {
                dropped_rows += 1;
                continue 'rows;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| ingest_err(*line, c + 1, format!("cannot parse '{cell}' as a number")))?;
            if !v.is_finite() {
                return Err(ingest_err(*line, c + 1, "non-finite value"));
            }
            vals.push(v);
        }
        if let Some(li) = label_idx {
            truth.push(rec[li].clone());
        }
        rows.push(vals);
        row_indices.push(pos);
    }
    if dropped_rows > 0 {
        log::warn!("dropped {dropped_rows} rows with missing values");
    }
    let n = rows.len();
    if n < 2 {
        return Err(Error::TooSmall { needed: 2, got: n });
    }

    let raw = Array2::from_shape_fn((feature_cols.len(), n), |(f, i)| rows[i][f]);
    let mut keep = Vec::new();
    let mut dropped_features = Vec::new();
    let mut sds = Vec::new();
    for (f, col) in raw.axis_iter(Axis(0)).enumerate() {
        let sd = col.std(1.0);
        let scale = col.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        if sd <= 1e-12 * scale || sd == 0.0 {
            dropped_features.push(feature_cols[f]);
        } else {
            keep.push(f);
            sds.push(sd);
        }
    }
    if keep.is_empty() {
        return Err(Error::DegenerateData("every feature is constant".into()));
    }
    if !dropped_features.is_empty() {
        log::warn!("dropped {} zero-variance features", dropped_features.len());
    }
    let mut data = raw.select(Axis(0), &keep);
    for (mut row, sd) in data.axis_iter_mut(Axis(0)).zip(&sds) {
        row /= *sd;
    }
    let feature_names = header.map(|h| keep.iter().map(|&f| h[feature_cols[f]].clone()).collect());
    Ok(LabeledDataset {
        data,
        truth: label_idx.map(|_| truth),
        feature_names,
        row_indices,
        dropped_rows,
        dropped_features,
    })
}
