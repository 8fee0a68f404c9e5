//! Experiment harness: data handling, protocol runners, reports and plots.

pub mod data;
pub mod experiments;
pub mod plot;
pub mod report;
pub mod synthetic;
pub mod tabular;
pub mod timeseries;

use std::path::Path;

use thiserror::Error;

use crate::hyperopt::{fit, FitError, SearchConfig};
use crate::kernel::{KernelError, KernelSpec};
use crate::points::Points;
use crate::regression::{posterior, predictive_nll, PriorKind, RegressionError, TrainingSet};
use crate::validation::ValidationError;

pub use data::{load_tabular, subsample, zscore, Dataset};
pub use report::{CellOutcome, ResultRow, ResultTable};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "IMPROPER_GP_WORKERS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("series of length {len} is too short for {needed} points")]
    InsufficientLength { len: usize, needed: usize },
    #[error("non-positive price {value} at index {index}")]
    NonPositivePrice { index: usize, value: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("csv: {0}")]
    Csv(csv::Error),
    #[error("json: {0}")]
    Json(serde_json::Error),
}

impl HarnessError {
    pub fn io(path: impl AsRef<Path>, err: impl std::fmt::Display) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}

/// Thread pool sized by `IMPROPER_GP_WORKERS`, else by rayon's default.
pub fn worker_pool() -> rayon::ThreadPool {
    let workers = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    builder.build().expect("thread pool")
}

/// Fits `template` on the training data, predicts the test inputs and
/// scores them.
pub fn evaluate_cell(
    template: &KernelSpec,
    train: &Dataset,
    test_x: &Points,
    test_y: &[f64],
    search: &SearchConfig,
) -> Result<(CellOutcome, crate::regression::PosteriorGaussian), HarnessError> {
    let params = fit(template, &train.x, &train.y, search)?;
    let spec = params.kernel(template);
    let ts = TrainingSet::new(train.x.clone(), train.y.clone(), params.noise_sigma)?;
    let post = posterior(PriorKind::for_spec(&spec), &spec, &ts, test_x)?;
    let nll = predictive_nll(&post, test_y)?;
    Ok((CellOutcome { nll, params }, post))
}
