//! Result tables and the JSON report.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::HarnessError;
use crate::hyperopt::HyperParams;
use crate::kernel::KernelSpec;
use crate::regression::{median, NllSummary, PriorKind};

/// Scores of one fit on one test set.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub nll: NllSummary,
    pub params: HyperParams,
}

/// Aggregated scores for one (dataset, kernel) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub dataset: String,
    pub kernel: String,
    pub prior: PriorKind,
    pub mean_nll: Option<f64>,
    pub median_nll: Option<f64>,
    pub se_median: Option<f64>,
    /// Median fitted length scale across resamples.
    pub l: Option<f64>,
    /// Median fitted noise standard deviation across resamples.
    pub sigma: Option<f64>,
    pub resamples: usize,
    pub failed_resamples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Sample standard deviation; `None` below two values.
pub fn sample_sd(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let m = values.iter().sum::<f64>() / n as f64;
    Some((values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt())
}

impl ResultRow {
    /// Row from `B` independent resamples. The reported median is the median
    /// of per-resample medians, and its standard error is their sample
    /// standard deviation.
    pub fn from_resamples(
        dataset: &str,
        spec: &KernelSpec,
        outcomes: &[Result<CellOutcome, String>],
    ) -> Self {
        let ok: Vec<&CellOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
        let medians: Vec<f64> = ok.iter().map(|o| o.nll.median).collect();
        let means: Vec<f64> = ok.iter().map(|o| o.nll.mean).collect();
        let ls: Vec<f64> = ok.iter().filter_map(|o| o.params.length_scale).collect();
        let sigmas: Vec<f64> = ok.iter().map(|o| o.params.noise_sigma).collect();
        let error = if ok.is_empty() {
            outcomes.iter().find_map(|o| o.as_ref().err().cloned())
        } else {
            None
        };
        Self {
            dataset: dataset.to_string(),
            kernel: spec.label(),
            prior: PriorKind::for_spec(spec),
            mean_nll: finite(means.iter().sum::<f64>() / means.len() as f64),
            median_nll: finite(median(&medians)),
            se_median: sample_sd(&medians),
            l: finite(median(&ls)),
            sigma: finite(median(&sigmas)),
            resamples: outcomes.len(),
            failed_resamples: outcomes.len() - ok.len(),
            error,
        }
    }

    /// Row from a single test set, with the standard error of the median
    /// estimated by `resamples` bootstrap draws of the per-point scores.
    pub fn from_bootstrap(
        dataset: &str,
        spec: &KernelSpec,
        outcome: Result<&CellOutcome, String>,
        resamples: usize,
        seed: u64,
    ) -> Self {
        match outcome {
            Ok(o) => {
                let per = &o.nll.per_point;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let medians: Vec<f64> = (0..resamples)
                    .map(|_| {
                        let draw: Vec<f64> = (0..per.len())
                            .map(|_| per[rng.random_range(0..per.len())])
                            .collect();
                        median(&draw)
                    })
                    .collect();
                Self {
                    dataset: dataset.to_string(),
                    kernel: spec.label(),
                    prior: PriorKind::for_spec(spec),
                    mean_nll: finite(o.nll.mean),
                    median_nll: finite(o.nll.median),
                    se_median: sample_sd(&medians),
                    l: o.params.length_scale,
                    sigma: Some(o.params.noise_sigma),
                    resamples,
                    failed_resamples: 0,
                    error: None,
                }
            }
            Err(e) => Self {
                dataset: dataset.to_string(),
                kernel: spec.label(),
                prior: PriorKind::for_spec(spec),
                mean_nll: None,
                median_nll: None,
                se_median: None,
                l: None,
                sigma: None,
                resamples,
                failed_resamples: resamples,
                error: Some(e),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_default()
}

impl ResultTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "dataset",
            "kernel",
            "prior",
            "mean_nll",
            "median_nll",
            "se_median",
            "l",
            "sigma",
            "resamples",
            "failed_resamples",
        ])
        .map_err(HarnessError::Csv)?;
        for r in &self.rows {
            let prior = match r.prior {
                PriorKind::Proper => "proper",
                PriorKind::Improper => "improper",
            };
            w.write_record([
                r.dataset.clone(),
                r.kernel.clone(),
                prior.to_string(),
                cell(r.mean_nll),
                cell(r.median_nll),
                cell(r.se_median),
                cell(r.l),
                cell(r.sigma),
                r.resamples.to_string(),
                r.failed_resamples.to_string(),
            ])
            .map_err(HarnessError::Csv)?;
        }
        w.flush().map_err(|e| HarnessError::io("results.csv", e))?;
        Ok(())
    }

    /// Best (lowest) median NLL among rows of `dataset` with the given prior.
    pub fn best_median(&self, dataset: &str, prior: PriorKind) -> Option<&ResultRow> {
        self.rows
            .iter()
            .filter(|r| r.dataset == dataset && r.prior == prior)
            .filter(|r| r.median_nll.is_some())
            .min_by(|a, b| a.median_nll.unwrap().total_cmp(&b.median_nll.unwrap()))
    }
}

/// A dataset that could not be processed at all.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetFailure {
    pub dataset: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<C: Serialize> {
    pub experiment: String,
    pub config: C,
    pub per_cell: Vec<ResultRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<DatasetFailure>,
}

/// Writes `results.csv` and `report.json` into `dir`.
pub fn write_outputs<C: Serialize>(dir: &Path, report: &Report<C>) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let csv_path = dir.join("results.csv");
    let f = std::fs::File::create(&csv_path).map_err(|e| HarnessError::io(&csv_path, e))?;
    ResultTable {
        rows: report.per_cell.clone(),
    }
    .write_csv(f)?;
    let json_path = dir.join("report.json");
    let text = serde_json::to_string_pretty(report).map_err(HarnessError::Json)?;
    std::fs::write(&json_path, text).map_err(|e| HarnessError::io(&json_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(median: f64, mean: f64, l: f64) -> CellOutcome {
        CellOutcome {
            nll: NllSummary {
                per_point: vec![median],
                mean,
                median,
            },
            params: HyperParams {
                length_scale: Some(l),
                noise_sigma: 0.1,
                objective_value: 0.0,
                evaluations: 1,
                anchor: 0,
            },
        }
    }

    #[test]
    fn aggregates_over_resamples() {
        let spec = KernelSpec::smooth_walk(1.0).unwrap();
        let outs = vec![
            Ok(outcome(1.0, 2.0, 0.5)),
            Ok(outcome(3.0, 4.0, 1.5)),
            Err("boom".to_string()),
            Ok(outcome(2.0, 3.0, 1.0)),
        ];
        let r = ResultRow::from_resamples("d", &spec, &outs);
        assert_eq!(r.median_nll, Some(2.0));
        assert_eq!(r.mean_nll, Some(3.0));
        assert_eq!(r.se_median, Some(1.0));
        assert_eq!(r.l, Some(1.0));
        assert_eq!(r.failed_resamples, 1);
        assert_eq!(r.prior, PriorKind::Improper);
        assert!(r.error.is_none());

        let all_bad = ResultRow::from_resamples("d", &spec, &[Err("x".into())]);
        assert_eq!(all_bad.median_nll, None);
        assert_eq!(all_bad.error.as_deref(), Some("x"));
    }

    #[test]
    fn csv_and_json_shapes() {
        let spec = KernelSpec::squared_exponential(1.0).unwrap();
        let row = ResultRow::from_resamples("d", &spec, &[Ok(outcome(1.0, 1.0, 1.0))]);
        let dir = tempfile::tempdir().unwrap();
        let report = Report {
            experiment: "tabular".into(),
            config: serde_json::json!({"seed": 1}),
            per_cell: vec![row],
            failures: vec![],
        };
        write_outputs(dir.path(), &report).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert!(csv.starts_with("dataset,kernel,prior,mean_nll,median_nll,se_median,l,sigma"));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        let cell = &json["per_cell"][0];
        for key in [
            "dataset",
            "kernel",
            "mean_nll",
            "median_nll",
            "se_median",
            "l",
            "sigma",
        ] {
            assert!(cell.get(key).is_some(), "missing {key}");
        }
        assert!(cell["se_median"].is_null());
    }
}
