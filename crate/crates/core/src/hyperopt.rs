//! Length-scale and noise fitting by the conditional marginal likelihood.
//!
//! A log-spaced grid is evaluated first (in parallel), then a Nelder–Mead
//! simplex refines the best grid point in log-parameter space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::KernelSpec;
use crate::points::Points;
use crate::regression::{conditional_log_marginal, RegressionError, TrainingSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 2 observations, got {0}")]
    NotEnoughData(usize),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("{} inputs but {} targets", .points, .targets)]
    LengthMismatch { points: usize, targets: usize },
    #[error("objective non-finite at every grid point ({} failures)", .failures.len())]
    FitFailure { failures: Vec<GridFailure> },
}

/// Why the objective could not be evaluated at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFailure {
    pub length_scale: Option<f64>,
    pub noise_sigma: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    #[serde(default = "default_length_bounds")]
    pub length_scale: [f64; 2],
    #[serde(default = "default_noise_bounds")]
    pub noise_sigma: [f64; 2],
}

fn default_length_bounds() -> [f64; 2] {
    [1e-3, 1e3]
}

fn default_noise_bounds() -> [f64; 2] {
    [1e-4, 1e1]
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            length_scale: default_length_bounds(),
            noise_sigma: default_noise_bounds(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Grid points per parameter.
    pub grid: usize,
    pub bounds: Bounds,
    /// Seeds the choice of the conditioning observation, fixed for the fit.
    pub anchor_seed: u64,
    /// Budget for the simplex refinement.
    pub max_evals: usize,
    /// Simplex diameter, in log units, below which refinement stops.
    pub tolerance: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid: 12,
            bounds: Bounds::default(),
            anchor_seed: 0,
            max_evals: 200,
            tolerance: 1e-3,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if self.grid < 2 {
            return Err(FitError::InvalidConfig(format!(
                "grid must be at least 2, got {}",
                self.grid
            )));
        }
        for (name, [lo, hi]) in [
            ("length_scale", self.bounds.length_scale),
            ("noise_sigma", self.bounds.noise_sigma),
        ] {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(FitError::InvalidConfig(format!(
                    "{name} bounds [{lo}, {hi}] are not 0 < lo < hi"
                )));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(FitError::InvalidConfig("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Fitted hyperparameters. `length_scale` is `None` for families that have
/// none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperParams {
    pub length_scale: Option<f64>,
    pub noise_sigma: f64,
    pub objective_value: f64,
    pub evaluations: usize,
    pub anchor: usize,
}

impl HyperParams {
    /// The template kernel with the fitted length scale.
    pub fn kernel(&self, template: &KernelSpec) -> KernelSpec {
        match self.length_scale {
            Some(l) => template.with_length_scale(l).unwrap_or(*template),
            None => *template,
        }
    }
}

/// Index of the conditioning observation used for a fit.
pub fn anchor_index(m: usize, seed: u64) -> usize {
    ChaCha8Rng::seed_from_u64(seed).random_range(0..m)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

struct Objective<'a> {
    template: &'a KernelSpec,
    x: &'a Points,
    y: &'a [f64],
    anchor: usize,
    fit_length: bool,
}

impl Objective<'_> {
    /// Conditional log marginal at log-parameters `p` (`[ln l, ln σ]` or
    /// `[ln σ]`).
    fn eval(&self, p: &[f64]) -> Result<f64, String> {
        let (spec, log_sigma) = if self.fit_length {
            let spec = self
                .template
                .with_length_scale(p[0].exp())
                .map_err(|e| e.to_string())?;
            (spec, p[1])
        } else {
            (*self.template, p[0])
        };
        let train = TrainingSet::new(self.x.clone(), self.y.to_vec(), log_sigma.exp())
            .map_err(|e: RegressionError| e.to_string())?;
        let v = conditional_log_marginal(&spec, &train, self.anchor).map_err(|e| e.to_string())?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("objective evaluated to {v}"))
        }
    }

    fn params(&self, p: &[f64]) -> (Option<f64>, f64) {
        if self.fit_length {
            (Some(p[0].exp()), p[1].exp())
        } else {
            (None, p[0].exp())
        }
    }
}

/// Maximizes the conditional log marginal likelihood over length scale and
/// noise within the configured bounds.
pub fn fit(
    template: &KernelSpec,
    x: &Points,
    y: &[f64],
    cfg: &SearchConfig,
) -> Result<HyperParams, FitError> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(FitError::LengthMismatch {
            points: x.len(),
            targets: y.len(),
        });
    }
    let m = y.len();
    if m < 2 {
        return Err(FitError::NotEnoughData(m));
    }
    let fit_length = template.family().uses_length_scale();
    let obj = Objective {
        template,
        x,
        y,
        anchor: anchor_index(m, cfg.anchor_seed),
        fit_length,
    };

    let sigmas = log_grid(
        cfg.bounds.noise_sigma[0],
        cfg.bounds.noise_sigma[1],
        cfg.grid,
    );
    let (lo, hi): (Vec<f64>, Vec<f64>);
    let grid: Vec<Vec<f64>> = if fit_length {
        let ls = log_grid(
            cfg.bounds.length_scale[0],
            cfg.bounds.length_scale[1],
            cfg.grid,
        );
        lo = vec![ls[0], sigmas[0]];
        hi = vec![ls[cfg.grid - 1], sigmas[cfg.grid - 1]];
        ls.iter()
            .flat_map(|&l| sigmas.iter().map(move |&s| vec![l, s]))
            .collect()
    } else {
        lo = vec![sigmas[0]];
        hi = vec![sigmas[cfg.grid - 1]];
        sigmas.iter().map(|&s| vec![s]).collect()
    };

    let values: Vec<Result<f64, String>> = grid.par_iter().map(|p| obj.eval(p)).collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Ok(v) = v {
            if best.is_none_or(|(_, b)| *v > b) {
                best = Some((i, *v));
            }
        }
    }
    let Some((best_idx, best_val)) = best else {
        let failures = grid
            .iter()
            .zip(values)
            .map(|(p, v)| {
                let (length_scale, noise_sigma) = obj.params(p);
                GridFailure {
                    length_scale,
                    noise_sigma,
                    reason: v.err().unwrap_or_default(),
                }
            })
            .collect();
        return Err(FitError::FitFailure { failures });
    };

    let step: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| (b - a) / (cfg.grid - 1) as f64)
        .collect();
    let neg = |p: &[f64]| obj.eval(p).map(|v| -v).unwrap_or(f64::INFINITY);
    let refined = nelder_mead(
        neg,
        &grid[best_idx],
        -best_val,
        &step,
        &lo,
        &hi,
        cfg.max_evals,
        cfg.tolerance,
    );
    let (length_scale, noise_sigma) = obj.params(&refined.point);
    Ok(HyperParams {
        length_scale,
        noise_sigma,
        objective_value: -refined.value,
        evaluations: grid.len() + refined.evaluations,
        anchor: obj.anchor,
    })
}

struct Minimum {
    point: Vec<f64>,
    value: f64,
    evaluations: usize,
}

fn clamp(p: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, a), b) in p.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*a, *b);
    }
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (a - b)
    a.iter().zip(b).map(|(x, y)| x + t * (x - y)).collect()
}

/// Box-clamped Nelder–Mead minimization. `f0` is `f(start)`, already known.
#[allow(clippy::too_many_arguments)]
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    start: &[f64],
    f0: f64,
    step: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_evals: usize,
    tolerance: f64,
) -> Minimum {
    let n = start.len();
    let mut evals = 0;
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.to_vec(), f0)];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step[i];
        if p[i] > hi[i] {
            p[i] = start[i] - step[i];
        }
        clamp(&mut p, lo, hi);
        let v = f(&p);
        evals += 1;
        simplex.push((p, v));
    }

    let diameter = |s: &[(Vec<f64>, f64)]| {
        s[1..]
            .iter()
            .map(|(p, _)| {
                p.iter()
                    .zip(&s[0].0)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    };

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if evals >= max_evals || diameter(&simplex) < tolerance {
            break;
        }
        let worst = simplex[n].clone();
        let mut centroid = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let try_point = |t: f64, evals: &mut usize| {
            let mut p = combine(&centroid, &worst.0, t);
            clamp(&mut p, lo, hi);
            *evals += 1;
            let v = f(&p);
            (p, v)
        };

        let reflected = try_point(1.0, &mut evals);
        if reflected.1 < simplex[0].1 {
            let expanded = try_point(2.0, &mut evals);
            simplex[n] = if expanded.1 < reflected.1 {
                expanded
            } else {
                reflected
            };
            continue;
        }
        if reflected.1 < simplex[n - 1].1 {
            simplex[n] = reflected;
            continue;
        }
        let contracted = if reflected.1 < worst.1 {
            try_point(0.5, &mut evals)
        } else {
            try_point(-0.5, &mut evals)
        };
        if contracted.1 < worst.1.min(reflected.1) {
            simplex[n] = contracted;
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let p: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            evals += 1;
            *vertex = (p.clone(), f(&p));
        }
    }
    let (point, value) = simplex.swap_remove(0);
    Minimum {
        point,
        value,
        evaluations: evals,
    }
}
