//! Price-series forecasting: log transform, causal smoothing, and scoring
//! of each kernel's forecast over a fixed horizon.

use std::path::Path;

use rayon::prelude::*;

use super::data::{ColumnStats, Dataset};
use super::report::{ResultRow, ResultTable};
use super::{evaluate_cell, worker_pool, HarnessError};
use crate::hyperopt::SearchConfig;
use crate::kernel::KernelSpec;
use crate::points::Points;
use crate::regression::PosteriorGaussian;

/// Log prices smoothed by a trailing moving average of `window` values
/// (shorter at the start of the series).
pub fn preprocess_timeseries(prices: &[f64], window: usize) -> Result<Vec<f64>, HarnessError> {
    if window == 0 {
        return Err(HarnessError::Invalid("window must be at least 1".into()));
    }
    let mut logs = Vec::with_capacity(prices.len());
    for (index, &value) in prices.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(HarnessError::NonPositivePrice { index, value });
        }
        logs.push(value.ln());
    }
    let out = (0..logs.len())
        .map(|t| {
            let lo = (t + 1).saturating_sub(window);
            logs[lo..=t].iter().sum::<f64>() / (t + 1 - lo) as f64
        })
        .collect();
    Ok(out)
}

/// Reads one numeric column of a headed CSV (the last one by default).
pub fn load_series(path: &Path, column: Option<&str>) -> Result<Vec<f64>, HarnessError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    let header = reader
        .headers()
        .map_err(|e| HarnessError::io(path, e))?
        .clone();
    let col = match column {
        Some(name) => header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| {
                HarnessError::Invalid(format!("{}: no column {name:?}", path.display()))
            })?,
        None => header
            .len()
            .checked_sub(1)
            .ok_or_else(|| HarnessError::Invalid(format!("{}: empty header", path.display())))?,
    };
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::io(path, e))?;
        let cell = rec.get(col).unwrap_or("").trim();
        let v = cell.parse::<f64>().map_err(|_| HarnessError::Parse {
            row: i + 2,
            column: col + 1,
            message: format!("non-numeric cell {cell:?}"),
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Forecast of one kernel over the horizon.
#[derive(Debug, Clone)]
pub struct Forecast {
    pub kernel: KernelSpec,
    pub posterior: PosteriorGaussian,
}

#[derive(Debug, Clone)]
pub struct ForecastOutcome {
    pub table: ResultTable,
    pub forecasts: Vec<Option<Forecast>>,
    /// Standardized time of every series index used.
    pub times: Vec<f64>,
}

/// Fits each kernel to the first `train_len` values and scores the
/// following `horizon` values. Time is standardized with the training-window
/// statistics; values stay in their own units.
#[allow(clippy::too_many_arguments)]
pub fn run_forecast(
    name: &str,
    series: &[f64],
    train_len: usize,
    horizon: usize,
    kernels: &[KernelSpec],
    search: &SearchConfig,
    resamples: usize,
    seed: u64,
) -> Result<ForecastOutcome, HarnessError> {
    let needed = train_len + horizon;
    if train_len < 2 || horizon == 0 || series.len() < needed {
        return Err(HarnessError::InsufficientLength {
            len: series.len(),
            needed: needed.max(2),
        });
    }
    let raw_t: Vec<f64> = (0..needed).map(|t| t as f64).collect();
    let stats = ColumnStats::of(&Points::from_scalars(&raw_t[..train_len])?);
    let times: Vec<f64> = raw_t
        .iter()
        .map(|t| (t - stats.mean[0]) / stats.scale[0])
        .collect();
    let train = Dataset::new(
        name,
        Points::from_scalars(&times[..train_len])?,
        series[..train_len].to_vec(),
    )?;
    let test_x = Points::from_scalars(&times[train_len..needed])?;
    let test_y = &series[train_len..needed];

    let results: Vec<_> = worker_pool().install(|| {
        kernels
            .par_iter()
            .map(|k| evaluate_cell(k, &train, &test_x, test_y, search).map_err(|e| e.to_string()))
            .collect()
    });
    let mut rows = Vec::with_capacity(kernels.len());
    let mut forecasts = Vec::with_capacity(kernels.len());
    for (k, r) in kernels.iter().zip(results) {
        match r {
            Ok((outcome, posterior)) => {
                rows.push(ResultRow::from_bootstrap(
                    name,
                    k,
                    Ok(&outcome),
                    resamples,
                    seed,
                ));
                forecasts.push(Some(Forecast {
                    kernel: outcome.params.kernel(k),
                    posterior,
                }));
            }
            Err(e) => {
                rows.push(ResultRow::from_bootstrap(name, k, Err(e), resamples, seed));
                forecasts.push(None);
            }
        }
    }
    Ok(ForecastOutcome {
        table: ResultTable { rows },
        forecasts,
        times,
    })
}
