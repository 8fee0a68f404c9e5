use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use serde::de::DeserializeOwned;

use improper_gp::harness::experiments::{
    run_fit, run_forecast_experiment, run_synthetic1d, run_synthetic2d, run_tabular_experiment,
    run_validate, FitConfig, ForecastConfig, Synthetic1dConfig, Synthetic2dConfig, ValidateConfig,
};
use improper_gp::harness::tabular::TabularConfig;
use improper_gp::harness::WORKERS_ENV;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Experiment {
    Synthetic1d,
    Synthetic2d,
    Forecast,
    Tabular,
    Validate,
    Fit,
}

/// Gaussian-process regression with improper priors: experiment runner.
#[derive(Debug, Parser)]
#[command(version, about, after_help = format!("Set {WORKERS_ENV} to override the worker count."))]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    /// JSON configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Forecast over 1000 points instead of the configured horizon.
    #[arg(long)]
    long_horizon: bool,
}

fn load<C: DeserializeOwned + Default>(path: Option<&Path>) -> Result<C> {
    match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(C::default()),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let base = cli
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let cfg_path = cli.config.as_deref();
    let out = cli.out.as_path();

    let summary = match cli.experiment {
        Experiment::Synthetic1d => {
            let mut cfg: Synthetic1dConfig = load(cfg_path)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            serde_json::to_string_pretty(&run_synthetic1d(&cfg, out)?.per_cell)?
        }
        Experiment::Synthetic2d => {
            let mut cfg: Synthetic2dConfig = load(cfg_path)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            serde_json::to_string_pretty(&run_synthetic2d(&cfg, out)?.per_cell)?
        }
        Experiment::Forecast => {
            let mut cfg: ForecastConfig = load(cfg_path)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            if cli.long_horizon {
                cfg.horizon = 1000;
                cfg.synthetic_length = cfg.synthetic_length.max(cfg.train_len + 1000);
            }
            serde_json::to_string_pretty(&run_forecast_experiment(&cfg, &base, out)?.per_cell)?
        }
        Experiment::Tabular => {
            let mut cfg: TabularConfig = load(cfg_path)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            if cfg.datasets.is_empty() {
                anyhow::bail!("tabular needs a config with at least one dataset");
            }
            serde_json::to_string_pretty(&run_tabular_experiment(&cfg, &base, out)?.per_cell)?
        }
        Experiment::Validate => {
            let mut cfg: ValidateConfig = load(cfg_path)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            let rep = run_validate(&cfg, out)?;
            rep.reports
                .iter()
                .map(|r| format!("{} seed {}: violation = {}", r.kernel, r.seed, r.violation))
                .collect::<Vec<_>>()
                .join("\n")
        }
        Experiment::Fit => {
            let path = cfg_path.context("fit needs --config with a data path and kernel")?;
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let mut cfg: FitConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            if let Some(s) = cli.seed {
                cfg.search.anchor_seed = s;
            }
            serde_json::to_string_pretty(&run_fit(&cfg, &base, out)?.params)?
        }
    };
    println!("{summary}");
    Ok(())
}
