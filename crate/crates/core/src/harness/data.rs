//! Tabular datasets: CSV loading, per-set standardization and resampling.

use std::path::Path;

use rand::Rng;
use serde::Serialize;

use super::HarnessError;
use crate::points::Points;

/// Feature matrix and targets with a name for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub x: Points,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    /// Rows skipped at load time because of missing values.
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn new(name: impl Into<String>, x: Points, y: Vec<f64>) -> Result<Self, HarnessError> {
        if x.len() != y.len() {
            return Err(HarnessError::Invalid(format!(
                "{} feature rows but {} targets",
                x.len(),
                y.len()
            )));
        }
        let feature_names = (0..x.dim()).map(|j| format!("x{j}")).collect();
        Ok(Self {
            name: name.into(),
            x,
            y,
            feature_names,
            dropped_rows: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            x: self.x.select(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            dropped_rows: self.dropped_rows,
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.trim().to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "?" | "null"
    )
}

/// Reads a headed CSV whose last column is the target. Keeps the first
/// `max_features` feature columns (all of them when `None`). Rows with a
/// missing cell are dropped and counted.
pub fn load_tabular(path: &Path, max_features: Option<usize>) -> Result<Dataset, HarnessError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| HarnessError::io(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| HarnessError::io(path, e))?
        .iter()
        .map(String::from)
        .collect();
    if header.len() < 2 {
        return Err(HarnessError::Invalid(format!(
            "{}: need at least one feature and a target column",
            path.display()
        )));
    }
    let n_features = header.len() - 1;
    let keep = max_features.map_or(n_features, |k| k.min(n_features));
    if keep == 0 {
        return Err(HarnessError::Invalid(
            "max_features must be at least 1".into(),
        ));
    }

    let mut coords = Vec::new();
    let mut y = Vec::new();
    let mut dropped = 0;
    for (i, record) in reader.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let record = record.map_err(|e| HarnessError::io(path, e))?;
        if record.len() != header.len() {
            return Err(HarnessError::Parse {
                row,
                column: record.len().min(header.len()),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        if record.iter().any(is_missing) {
            dropped += 1;
            continue;
        }
        let parse = |col: usize| -> Result<f64, HarnessError> {
            let cell = &record[col];
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(HarnessError::Parse {
                    row,
                    column: col + 1,
                    message: format!("non-numeric cell {cell:?}"),
                }),
            }
        };
        let mut feats = Vec::with_capacity(keep);
        for col in 0..n_features {
            let v = parse(col)?;
            if col < keep {
                feats.push(v);
            }
        }
        y.push(parse(n_features)?);
        coords.extend(feats);
    }
    if y.len() < 2 {
        return Err(HarnessError::Invalid(format!(
            "{}: need at least 2 complete rows, found {}",
            path.display(),
            y.len()
        )));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(Dataset {
        name,
        x: Points::new(keep, coords)?,
        y,
        feature_names: header[..keep].to_vec(),
        dropped_rows: dropped,
    })
}

/// Column means and scales used to standardize one set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Columns with zero variance, whose scale was set to 1.
    pub degenerate: Vec<usize>,
}

impl ColumnStats {
    pub fn of(x: &Points) -> Self {
        let (n, d) = (x.len() as f64, x.dim());
        let mut mean = vec![0.0; d];
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for row in x.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let mut degenerate = Vec::new();
        let scale = var
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let s = v.sqrt();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    degenerate.push(j);
                    1.0
                }
            })
            .collect();
        Self {
            mean,
            scale,
            degenerate,
        }
    }

    pub fn apply(&self, x: &Points) -> Points {
        x.map_rows(|row| {
            row.iter()
                .zip(&self.mean)
                .zip(&self.scale)
                .map(|((v, m), s)| (v - m) / s)
                .collect()
        })
        .expect("standardization keeps dimension and finiteness")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZScoreStats {
    pub train: ColumnStats,
    pub test: ColumnStats,
}

/// Standardizes the features of each set with its own mean and (population)
/// standard deviation. Targets are untouched.
pub fn zscore(train: &Dataset, test: &Dataset) -> (Dataset, Dataset, ZScoreStats) {
    let stats = ZScoreStats {
        train: ColumnStats::of(&train.x),
        test: ColumnStats::of(&test.x),
    };
    let tr = Dataset {
        x: stats.train.apply(&train.x),
        ..train.clone()
    };
    let te = Dataset {
        x: stats.test.apply(&test.x),
        ..test.clone()
    };
    (tr, te, stats)
}

/// `size` rows drawn uniformly with replacement.
pub fn subsample<R: Rng>(data: &Dataset, size: usize, rng: &mut R) -> Dataset {
    assert!(!data.is_empty(), "cannot subsample an empty dataset");
    let idx: Vec<usize> = (0..size).map(|_| rng.random_range(0..data.len())).collect();
    data.select(&idx)
}

/// Random split without replacement; at least one row lands on each side.
pub fn split<R: Rng>(
    data: &Dataset,
    test_fraction: f64,
    rng: &mut R,
) -> Result<(Dataset, Dataset), HarnessError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(HarnessError::Invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = data.len();
    let mut idx: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), rng);
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let (test, train) = idx.split_at(n_test);
    Ok((data.select(train), data.select(test)))
}
