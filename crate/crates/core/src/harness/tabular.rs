//! Resampled benchmark on tabular regression datasets.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{load_tabular, split, subsample, zscore, ColumnStats, Dataset};
use super::report::{DatasetFailure, ResultRow, ResultTable};
use super::{evaluate_cell, worker_pool, HarnessError};
use crate::hyperopt::SearchConfig;
use crate::kernel::{catalogue, KernelSpec};
use crate::points::Points;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    /// Defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
    pub path: PathBuf,
    /// Separate test file; otherwise the data is split at random.
    #[serde(default)]
    pub test_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TabularConfig {
    pub datasets: Vec<DatasetSource>,
    pub kernels: Vec<KernelSpec>,
    pub search: SearchConfig,
    pub seed: u64,
    pub resamples: usize,
    pub subsample_size: usize,
    /// Test rows drawn with replacement per resample; the whole test set
    /// when absent.
    pub test_size: Option<usize>,
    pub test_fraction: f64,
    pub max_features: Option<usize>,
    /// Standardize targets with the training-subsample statistics.
    pub standardize_target: bool,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            kernels: catalogue(),
            search: SearchConfig::default(),
            seed: 0,
            resamples: 10,
            subsample_size: 100,
            test_size: None,
            test_fraction: 0.3,
            max_features: Some(6),
            standardize_target: false,
        }
    }
}

impl TabularConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.subsample_size < 2 {
            return Err(HarnessError::Invalid(
                "subsample_size must be at least 2".into(),
            ));
        }
        if self.resamples == 0 {
            return Err(HarnessError::Invalid("resamples must be at least 1".into()));
        }
        if self.kernels.is_empty() {
            return Err(HarnessError::Invalid("kernel list is empty".into()));
        }
        self.search.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TabularOutcome {
    pub table: ResultTable,
    pub failures: Vec<DatasetFailure>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Train and test sets of one dataset before resampling.
fn load_source(
    src: &DatasetSource,
    cfg: &TabularConfig,
    base: &Path,
) -> Result<(String, Dataset, Dataset), HarnessError> {
    let data = load_tabular(&resolve(base, &src.path), cfg.max_features)?;
    let name = src.name.clone().unwrap_or_else(|| data.name.clone());
    let (train, test) = match &src.test_path {
        Some(t) => {
            let test = load_tabular(&resolve(base, t), cfg.max_features)?;
            if test.dim() != data.dim() {
                return Err(HarnessError::Invalid(format!(
                    "train has {} features, test has {}",
                    data.dim(),
                    test.dim()
                )));
            }
            (data, test)
        }
        None => {
            // stream 0 is reserved for the split so resamples do not depend
            // on it
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(0);
            split(&data, cfg.test_fraction, &mut rng)?
        }
    };
    Ok((name, train, test))
}

fn standardize_targets(train: &mut Dataset, test: &mut Dataset) {
    let stats = ColumnStats::of(&Points::from_scalars(&train.y).expect("finite targets"));
    let (m, s) = (stats.mean[0], stats.scale[0]);
    for v in train.y.iter_mut().chain(test.y.iter_mut()) {
        *v = (*v - m) / s;
    }
}

/// Training subsample and test set for resample `b`, both standardized.
fn resample(train: &Dataset, test: &Dataset, cfg: &TabularConfig, b: usize) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(b as u64 + 1);
    let tr = subsample(train, cfg.subsample_size, &mut rng);
    let te = match cfg.test_size {
        Some(n) => subsample(test, n, &mut rng),
        None => test.clone(),
    };
    let (mut tr, mut te, _) = zscore(&tr, &te);
    if cfg.standardize_target {
        standardize_targets(&mut tr, &mut te);
    }
    (tr, te)
}

/// Runs every (dataset, kernel, resample) cell on the worker pool and
/// aggregates per (dataset, kernel). Datasets that fail to load are reported
/// and skipped.
pub fn run_tabular(cfg: &TabularConfig, base: &Path) -> Result<TabularOutcome, HarnessError> {
    cfg.validate()?;
    let mut failures = Vec::new();
    let mut loaded = Vec::new();
    for src in &cfg.datasets {
        match load_source(src, cfg, base) {
            Ok(d) => loaded.push(d),
            Err(e) => failures.push(DatasetFailure {
                dataset: src
                    .name
                    .clone()
                    .unwrap_or_else(|| src.path.display().to_string()),
                error: e.to_string(),
            }),
        }
    }

    let pool = worker_pool();
    let prepared: Vec<Vec<(Dataset, Dataset)>> = pool.install(|| {
        loaded
            .par_iter()
            .map(|(_, tr, te)| {
                (0..cfg.resamples)
                    .map(|b| resample(tr, te, cfg, b))
                    .collect()
            })
            .collect()
    });

    let jobs: Vec<(usize, usize, usize)> = (0..loaded.len())
        .flat_map(|d| {
            (0..cfg.kernels.len()).flat_map(move |k| (0..cfg.resamples).map(move |b| (d, k, b)))
        })
        .collect();
    let results: Vec<_> = pool.install(|| {
        jobs.par_iter()
            .map(|&(d, k, b)| {
                let (tr, te) = &prepared[d][b];
                evaluate_cell(&cfg.kernels[k], tr, &te.x, &te.y, &cfg.search)
                    .map(|(o, _)| o)
                    .map_err(|e| e.to_string())
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(loaded.len() * cfg.kernels.len());
    for (chunk, &(d, k, _)) in results
        .chunks(cfg.resamples)
        .zip(jobs.iter().step_by(cfg.resamples))
    {
        rows.push(ResultRow::from_resamples(
            &loaded[d].0,
            &cfg.kernels[k],
            chunk,
        ));
    }
    Ok(TabularOutcome {
        table: ResultTable { rows },
        failures,
    })
}
