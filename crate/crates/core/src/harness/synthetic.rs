//! Synthetic regression problems and a price-series generator.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::HarnessError;
use crate::points::Points;

/// Ground-truth signal for the one-dimensional problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth1d {
    /// `sin(6t) + 0.4t − 5 tanh(t)`
    #[default]
    Trend,
    /// `sin(6t) − 6 tanh(4t)`
    Step,
}

impl Truth1d {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Truth1d::Trend => (6.0 * t).sin() + 0.4 * t - 5.0 * t.tanh(),
            Truth1d::Step => (6.0 * t).sin() - 6.0 * (4.0 * t).tanh(),
        }
    }
}

/// Spread of the one-dimensional inputs.
pub const INPUT_SD_1D: f64 = 2.5;
/// Radius of the disk the two-dimensional inputs are drawn from.
pub const DISK_RADIUS: f64 = 3.0;

pub fn truth_2d(p: &[f64]) -> f64 {
    (5.0 - p[0] * p[0] - p[1] * p[1]).tanh()
}

fn noisy(rng: &mut ChaCha8Rng, v: f64, noise: f64) -> f64 {
    if noise == 0.0 {
        return v;
    }
    let e: f64 = StandardNormal.sample(rng);
    v + noise * e
}

fn check(n: usize, noise: f64) -> Result<(), HarnessError> {
    if n < 2 {
        return Err(HarnessError::Invalid(format!(
            "need at least 2 samples, got {n}"
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(HarnessError::Invalid(format!(
            "noise must be nonnegative, got {noise}"
        )));
    }
    Ok(())
}

/// `n` inputs from `N(0, 2.5²)` with targets `truth(t)` plus Gaussian noise.
pub fn synthetic_1d(
    n: usize,
    noise: f64,
    truth: Truth1d,
    seed: u64,
) -> Result<Dataset, HarnessError> {
    check(n, noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = Normal::new(0.0, INPUT_SD_1D).expect("valid normal");
    let ts: Vec<f64> = (0..n).map(|_| input.sample(&mut rng)).collect();
    let y = ts
        .iter()
        .map(|&t| noisy(&mut rng, truth.eval(t), noise))
        .collect();
    Dataset::new("synthetic1d", Points::from_scalars(&ts)?, y)
}

/// `n` inputs uniform on the disk of radius 3 with targets
/// `tanh(5 − x² − y²)` plus Gaussian noise.
pub fn synthetic_2d(n: usize, noise: f64, seed: u64) -> Result<Dataset, HarnessError> {
    check(n, noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let r = DISK_RADIUS * rng.random::<f64>().sqrt();
        let a = 2.0 * PI * rng.random::<f64>();
        coords.extend([r * a.cos(), r * a.sin()]);
    }
    let x = Points::new(2, coords)?;
    let y = x
        .rows()
        .map(|p| noisy(&mut rng, truth_2d(p), noise))
        .collect();
    Dataset::new("synthetic2d", x, y)
}

/// `n` equally spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Row-major `side × side` grid over `[-half, half]²`, first coordinate
/// varying fastest.
pub fn grid_2d(side: usize, half: f64) -> Points {
    let axis = linspace(-half, half, side);
    let coords = axis
        .iter()
        .flat_map(|&b| axis.iter().flat_map(move |&a| [a, b]))
        .collect();
    Points::new(2, coords).expect("finite grid")
}

/// Geometric random walk: `p[t+1] = p[t] · exp(drift + vol · z)`.
pub fn random_walk_prices(n: usize, start: f64, drift: f64, vol: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut p = start;
    for _ in 0..n {
        out.push(p);
        let z: f64 = StandardNormal.sample(&mut rng);
        p *= (drift + vol * z).exp();
    }
    out
}
