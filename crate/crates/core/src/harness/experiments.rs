//! Runners behind the command-line subcommands. Each reads its own JSON
//! configuration and writes `results.csv`, `report.json` and `plots/` into
//! the output directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{load_tabular, zscore, Dataset};
use super::plot::{heatmap_svg, write_band_csv, write_svg, Band, LinePlot};
use super::report::{write_outputs, Report, ResultRow};
use super::synthetic::{
    grid_2d, linspace, random_walk_prices, synthetic_1d, synthetic_2d, truth_2d, Truth1d,
};
use super::tabular::{run_tabular, TabularConfig};
use super::timeseries::{load_series, preprocess_timeseries, run_forecast};
use super::{evaluate_cell, worker_pool, HarnessError};
use crate::hyperopt::{fit, HyperParams, SearchConfig};
use crate::kernel::{catalogue, KernelSpec};
use crate::points::Points;
use crate::regression::{posterior, sample_posterior, PosteriorGaussian, PriorKind, TrainingSet};
use crate::validation::{min_quadform_curve, NegatedBrownian, ValidationReport};

/// File-name-safe version of a kernel label.
pub fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    s.trim_matches('_').to_string()
}

fn plots_dir(out: &Path) -> Result<PathBuf, HarnessError> {
    let dir = out.join("plots");
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    Ok(dir)
}

fn stationary_catalogue() -> Vec<KernelSpec> {
    catalogue()
        .into_iter()
        .filter(|k| k.family().is_stationary())
        .collect()
}

fn refit_posterior(
    template: &KernelSpec,
    params: &HyperParams,
    train: &Dataset,
    queries: &Points,
) -> Result<PosteriorGaussian, HarnessError> {
    let spec = params.kernel(template);
    let ts = TrainingSet::new(train.x.clone(), train.y.clone(), params.noise_sigma)?;
    Ok(posterior(PriorKind::for_spec(&spec), &spec, &ts, queries)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Synthetic1dConfig {
    pub kernels: Vec<KernelSpec>,
    pub search: SearchConfig,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub noise: f64,
    pub truth: Truth1d,
    pub query_points: usize,
    pub query_range: [f64; 2],
    pub samples: usize,
}

impl Default for Synthetic1dConfig {
    fn default() -> Self {
        Self {
            kernels: catalogue(),
            search: SearchConfig::default(),
            seed: 0,
            n_train: 25,
            n_test: 200,
            noise: 0.05,
            truth: Truth1d::Trend,
            query_points: 300,
            query_range: [-7.5, 7.5],
            samples: 3,
        }
    }
}

/// Fits every kernel to a small 1-d sample, scores held-out draws from the
/// same generator and plots each posterior against the truth.
pub fn run_synthetic1d(
    cfg: &Synthetic1dConfig,
    out: &Path,
) -> Result<Report<Synthetic1dConfig>, HarnessError> {
    let train = synthetic_1d(cfg.n_train, cfg.noise, cfg.truth, cfg.seed)?;
    let test = synthetic_1d(cfg.n_test, cfg.noise, cfg.truth, cfg.seed.wrapping_add(1))?;
    let q = linspace(cfg.query_range[0], cfg.query_range[1], cfg.query_points);
    let qp = Points::from_scalars(&q)?;
    let truth: Vec<f64> = q.iter().map(|&t| cfg.truth.eval(t)).collect();
    let plots = plots_dir(out)?;

    let results: Vec<_> = worker_pool().install(|| {
        cfg.kernels
            .par_iter()
            .map(|k| -> Result<_, HarnessError> {
                let (outcome, _) = evaluate_cell(k, &train, &test.x, &test.y, &cfg.search)?;
                let post = refit_posterior(k, &outcome.params, &train, &qp)?;
                Ok((outcome, post))
            })
            .collect()
    });

    let mut rows = Vec::new();
    for (k, r) in cfg.kernels.iter().zip(results) {
        match r {
            Ok((outcome, post)) => {
                let band = Band::latent(&post);
                let samples = sample_posterior(&post, cfg.samples, cfg.seed)?;
                let name = format!("synthetic1d_{}", slug(&k.label()));
                write_band_csv(&plots.join(format!("{name}.csv")), &q, &band, &samples)?;
                let svg = LinePlot {
                    title: &k.label(),
                    x: &q,
                    band: &band,
                    truth: Some(&truth),
                    observed: Some((train.x.coords(), &train.y)),
                }
                .to_svg();
                write_svg(&plots.join(format!("{name}.svg")), &svg)?;
                rows.push(ResultRow::from_bootstrap(
                    "synthetic1d",
                    k,
                    Ok(&outcome),
                    10,
                    cfg.seed,
                ));
            }
            Err(e) => rows.push(ResultRow::from_bootstrap(
                "synthetic1d",
                k,
                Err(e.to_string()),
                10,
                cfg.seed,
            )),
        }
    }
    let report = Report {
        experiment: "synthetic1d".into(),
        config: cfg.clone(),
        per_cell: rows,
        failures: vec![],
    };
    write_outputs(out, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Synthetic2dConfig {
    pub kernels: Vec<KernelSpec>,
    pub search: SearchConfig,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub noise: f64,
    pub grid_side: usize,
    pub grid_half_width: f64,
}

impl Default for Synthetic2dConfig {
    fn default() -> Self {
        Self {
            kernels: stationary_catalogue(),
            search: SearchConfig::default(),
            seed: 0,
            n_train: 100,
            n_test: 200,
            noise: 0.05,
            grid_side: 40,
            grid_half_width: 4.5,
        }
    }
}

/// Same as [`run_synthetic1d`] on the radial 2-d problem, with heat maps of
/// the posterior mean.
pub fn run_synthetic2d(
    cfg: &Synthetic2dConfig,
    out: &Path,
) -> Result<Report<Synthetic2dConfig>, HarnessError> {
    let train = synthetic_2d(cfg.n_train, cfg.noise, cfg.seed)?;
    let test = synthetic_2d(cfg.n_test, cfg.noise, cfg.seed.wrapping_add(1))?;
    let grid = grid_2d(cfg.grid_side, cfg.grid_half_width);
    let plots = plots_dir(out)?;
    let truth: Vec<f64> = grid.rows().map(truth_2d).collect();
    write_svg(
        &plots.join("synthetic2d_truth.svg"),
        &heatmap_svg("truth", cfg.grid_side, &truth),
    )?;

    let results: Vec<_> = worker_pool().install(|| {
        cfg.kernels
            .par_iter()
            .map(|k| -> Result<_, HarnessError> {
                let (outcome, _) = evaluate_cell(k, &train, &test.x, &test.y, &cfg.search)?;
                let post = refit_posterior(k, &outcome.params, &train, &grid)?;
                Ok((outcome, post))
            })
            .collect()
    });
    let mut rows = Vec::new();
    for (k, r) in cfg.kernels.iter().zip(results) {
        match r {
            Ok((outcome, post)) => {
                let mean: Vec<f64> = post.mean().iter().copied().collect();
                let svg = heatmap_svg(&k.label(), cfg.grid_side, &mean);
                write_svg(
                    &plots.join(format!("synthetic2d_{}.svg", slug(&k.label()))),
                    &svg,
                )?;
                rows.push(ResultRow::from_bootstrap(
                    "synthetic2d",
                    k,
                    Ok(&outcome),
                    10,
                    cfg.seed,
                ));
            }
            Err(e) => rows.push(ResultRow::from_bootstrap(
                "synthetic2d",
                k,
                Err(e.to_string()),
                10,
                cfg.seed,
            )),
        }
    }
    let report = Report {
        experiment: "synthetic2d".into(),
        config: cfg.clone(),
        per_cell: rows,
        failures: vec![],
    };
    write_outputs(out, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastConfig {
    /// Price CSV; a seeded geometric random walk is used when absent.
    pub series: Option<PathBuf>,
    pub column: Option<String>,
    pub synthetic_length: usize,
    pub window: usize,
    pub train_len: usize,
    pub horizon: usize,
    pub kernels: Vec<KernelSpec>,
    pub search: SearchConfig,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            series: None,
            column: None,
            synthetic_length: 1200,
            window: 35,
            train_len: 100,
            horizon: 300,
            kernels: catalogue(),
            search: SearchConfig::default(),
            resamples: 10,
            seed: 0,
        }
    }
}

/// Forecasts the (log, smoothed) series and plots each kernel's forecast.
/// Paths in the configuration are relative to `base`.
pub fn run_forecast_experiment(
    cfg: &ForecastConfig,
    base: &Path,
    out: &Path,
) -> Result<Report<ForecastConfig>, HarnessError> {
    let (name, prices) = match &cfg.series {
        Some(p) => {
            let path = if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            };
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "series".into());
            (name, load_series(&path, cfg.column.as_deref())?)
        }
        None => (
            "random_walk".to_string(),
            random_walk_prices(cfg.synthetic_length, 100.0, 2e-4, 0.015, cfg.seed),
        ),
    };
    let series = preprocess_timeseries(&prices, cfg.window)?;
    let res = run_forecast(
        &name,
        &series,
        cfg.train_len,
        cfg.horizon,
        &cfg.kernels,
        &cfg.search,
        cfg.resamples,
        cfg.seed,
    )?;
    let plots = plots_dir(out)?;
    let end = cfg.train_len + cfg.horizon;
    let t_axis: Vec<f64> = (cfg.train_len..end).map(|t| t as f64).collect();
    let obs_t: Vec<f64> = (0..cfg.train_len).map(|t| t as f64).collect();
    for f in res.forecasts.iter().flatten() {
        let band = Band::latent(&f.posterior);
        let svg = LinePlot {
            title: &f.kernel.label(),
            x: &t_axis,
            band: &band,
            truth: Some(&series[cfg.train_len..end]),
            observed: Some((&obs_t, &series[..cfg.train_len])),
        }
        .to_svg();
        let stem = format!("forecast_{}", slug(&f.kernel.label()));
        write_svg(&plots.join(format!("{stem}.svg")), &svg)?;
        write_band_csv(&plots.join(format!("{stem}.csv")), &t_axis, &band, &[])?;
    }
    let report = Report {
        experiment: "forecast".into(),
        config: cfg.clone(),
        per_cell: res.table.rows,
        failures: vec![],
    };
    write_outputs(out, &report)?;
    Ok(report)
}

/// Runs the tabular protocol and writes its outputs.
pub fn run_tabular_experiment(
    cfg: &TabularConfig,
    base: &Path,
    out: &Path,
) -> Result<Report<TabularConfig>, HarnessError> {
    let res = run_tabular(cfg, base)?;
    let report = Report {
        experiment: "tabular".into(),
        config: cfg.clone(),
        per_cell: res.table.rows,
        failures: res.failures,
    };
    write_outputs(out, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub kernels: Vec<KernelSpec>,
    pub dims: Vec<usize>,
    pub n_points: usize,
    pub n_vectors: usize,
    /// Number of seeds, starting at `seed`.
    pub repeats: u64,
    pub seed: u64,
    /// Also run the `+|τ|` kernel, which must fail.
    pub control: bool,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            kernels: catalogue()
                .into_iter()
                .filter(|k| k.family().is_stationary() && !k.is_proper())
                .collect(),
            dims: vec![1, 2, 5, 10, 20, 50],
            n_points: 100,
            n_vectors: 2000,
            repeats: 3,
            seed: 0,
            control: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateReport {
    pub experiment: String,
    pub config: ValidateConfig,
    pub reports: Vec<ValidationReport>,
}

/// Minimum quadratic form curves for each kernel and seed, one CSV each.
pub fn run_validate(cfg: &ValidateConfig, out: &Path) -> Result<ValidateReport, HarnessError> {
    let dir = out.join("validation");
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let mut reports = Vec::new();
    let pool = worker_pool();
    for s in cfg.seed..cfg.seed + cfg.repeats {
        for k in &cfg.kernels {
            let r = pool.install(|| {
                min_quadform_curve(k, &k.label(), &cfg.dims, cfg.n_points, cfg.n_vectors, s)
            })?;
            reports.push(r);
        }
        if cfg.control {
            let r = pool.install(|| {
                min_quadform_curve(
                    &NegatedBrownian,
                    "negated_brownian",
                    &cfg.dims,
                    cfg.n_points,
                    cfg.n_vectors,
                    s,
                )
            })?;
            reports.push(r);
        }
    }
    for r in &reports {
        let path = dir.join(format!("{}_seed{}.csv", slug(&r.kernel), r.seed));
        let f = std::fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        r.write_csv(f)?;
    }
    let report = ValidateReport {
        experiment: "validate".into(),
        config: cfg.clone(),
        reports,
    };
    let path = out.join("report.json");
    let text = serde_json::to_string_pretty(&report).map_err(HarnessError::Json)?;
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub data: PathBuf,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub max_features: Option<usize>,
    /// Standardize features before fitting.
    #[serde(default = "yes")]
    pub zscore: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub config: FitConfig,
    pub dataset: String,
    pub rows: usize,
    pub dropped_rows: usize,
    pub kernel: KernelSpec,
    pub params: HyperParams,
}

/// Fits one kernel to one CSV and writes `fit.json`.
pub fn run_fit(cfg: &FitConfig, base: &Path, out: &Path) -> Result<FitReport, HarnessError> {
    let path = if cfg.data.is_absolute() {
        cfg.data.clone()
    } else {
        base.join(&cfg.data)
    };
    let mut data = load_tabular(&path, cfg.max_features)?;
    if cfg.zscore {
        data = zscore(&data, &data).0;
    }
    let params = fit(&cfg.kernel, &data.x, &data.y, &cfg.search)?;
    let report = FitReport {
        config: cfg.clone(),
        dataset: data.name.clone(),
        rows: data.len(),
        dropped_rows: data.dropped_rows,
        kernel: params.kernel(&cfg.kernel),
        params,
    };
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let json = out.join("fit.json");
    let text = serde_json::to_string_pretty(&report).map_err(HarnessError::Json)?;
    std::fs::write(&json, text).map_err(|e| HarnessError::io(&json, e))?;
    Ok(report)
}
