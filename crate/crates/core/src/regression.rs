//! Posterior inference for proper and improper Gaussian-process priors.
//!
//! The improper posterior is the `c -> inf` limit of ordinary GP regression
//! with kernel `s + c`. Writing `Σ = S + σ²I`, `α = Σ⁻¹y`, `β = Σ⁻¹1` and
//! `γ = 1ᵀα / 1ᵀβ`, the limit is
//!
//! ```text
//! mean = S*(α − γβ) + γ
//! cov  = S** − S* Σ⁻¹ S*ᵀ + F Fᵀ / 1ᵀβ,   F = 1 − S*β
//! ```
//!
//! `Σ` is symmetric but usually indefinite, so every solve goes through the
//! pivoted LDLᵀ in [`crate::linalg`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::kernel::{cross_gram, gram, KernelError, KernelSpec};
use crate::linalg::{factor_symmetric, psd_factor, psd_repair, LinalgError, SymmetricMatrix};
use crate::points::Points;

/// Largest relative jitter the posterior covariance may need before it is
/// treated as a genuine failure.
pub const POSTERIOR_JITTER_MAX: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{points} training inputs but {targets} targets")]
    LengthMismatch { points: usize, targets: usize },
    #[error("noise standard deviation must be positive and finite, got {0}")]
    InvalidNoise(f64),
    #[error("non-finite target at index {0}")]
    NonFiniteTarget(usize),
    #[error("1ᵀΣ⁻¹1 = {value:e} is below the degeneracy threshold {threshold:e}")]
    DegenerateDenominator { value: f64, threshold: f64 },
    #[error("kernel {0} is not positive definite; use the improper posterior")]
    MustUseImproper(String),
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("shift c = {c:e} leaves {negative} negative eigenvalue(s); try a larger c")]
    TryLargerC { c: f64, negative: usize },
    #[error("need at least {need} observations, got {got}")]
    NotEnoughData { need: usize, got: usize },
    #[error("anchor index {anchor} out of range for {len} observations")]
    AnchorOutOfRange { anchor: usize, len: usize },
    #[error("non-finite predictive variance at query {0}")]
    NonFiniteVariance(usize),
}

/// Observed inputs, targets and the observation-noise standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    x: Points,
    y: Vec<f64>,
    noise_sigma: f64,
}

impl TrainingSet {
    pub fn new(x: Points, y: Vec<f64>, noise_sigma: f64) -> Result<Self, RegressionError> {
        if x.len() != y.len() {
            return Err(RegressionError::LengthMismatch {
                points: x.len(),
                targets: y.len(),
            });
        }
        if !(noise_sigma.is_finite() && noise_sigma > 0.0) {
            return Err(RegressionError::InvalidNoise(noise_sigma));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(RegressionError::NonFiniteTarget(i));
        }
        Ok(Self { x, y, noise_sigma })
    }

    pub fn x(&self) -> &Points {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn with_noise(&self, noise_sigma: f64) -> Result<Self, RegressionError> {
        Self::new(self.x.clone(), self.y.clone(), noise_sigma)
    }

    /// Same inputs with every target shifted by `b`.
    pub fn shifted(&self, b: f64) -> Result<Self, RegressionError> {
        Self::new(
            self.x.clone(),
            self.y.iter().map(|v| v + b).collect(),
            self.noise_sigma,
        )
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            noise_sigma: self.noise_sigma,
        }
    }
}

/// Gaussian posterior over latent function values at query points.
#[derive(Debug, Clone)]
pub struct PosteriorGaussian {
    queries: Points,
    mean: DVector<f64>,
    cov: SymmetricMatrix,
    jitter_used: f64,
    noise_sigma: f64,
}

#[derive(Serialize)]
struct PosteriorJson<'a> {
    mean: &'a [f64],
    cov: Vec<Vec<f64>>,
    jitter: f64,
}

impl Serialize for PosteriorGaussian {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let c = self.cov.as_matrix();
        PosteriorJson {
            mean: self.mean.as_slice(),
            cov: (0..c.nrows())
                .map(|i| c.row(i).iter().copied().collect())
                .collect(),
            jitter: self.jitter_used,
        }
        .serialize(s)
    }
}

impl PosteriorGaussian {
    pub fn queries(&self) -> &Points {
        &self.queries
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &SymmetricMatrix {
        &self.cov
    }

    /// Marginal variance of the latent value at query `i`.
    pub fn variance(&self, i: usize) -> f64 {
        self.cov.as_matrix()[(i, i)]
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Which vector multiplies the correction term of the limit covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrectionTerm {
    /// `F = 1 − S*Σ⁻¹1`.
    Shifted,
    /// `F = 1 − (S* + c11ᵀ)Σ⁻¹1` at a finite `c`. Kept only to show that
    /// this reading does not reproduce the large-`c` posterior.
    Literal { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImproperOptions {
    pub correction: CorrectionTerm,
    pub jitter_max: f64,
}

impl Default for ImproperOptions {
    fn default() -> Self {
        Self {
            correction: CorrectionTerm::Shifted,
            jitter_max: POSTERIOR_JITTER_MAX,
        }
    }
}

fn check_inputs(
    spec: &KernelSpec,
    train: &TrainingSet,
    queries: &Points,
) -> Result<(), RegressionError> {
    if train.is_empty() {
        return Err(RegressionError::EmptyTrainingSet);
    }
    if train.x.dim() != queries.dim() {
        return Err(KernelError::DimensionMismatch {
            left: queries.dim(),
            right: train.x.dim(),
        }
        .into());
    }
    spec.check_dim(train.x.dim())?;
    Ok(())
}

/// Limit posterior of the improper prior with kernel `spec`.
pub fn improper_posterior(
    spec: &KernelSpec,
    train: &TrainingSet,
    queries: &Points,
) -> Result<PosteriorGaussian, RegressionError> {
    improper_posterior_with(spec, train, queries, &ImproperOptions::default())
}

pub fn improper_posterior_with(
    spec: &KernelSpec,
    train: &TrainingSet,
    queries: &Points,
    opts: &ImproperOptions,
) -> Result<PosteriorGaussian, RegressionError> {
    check_inputs(spec, train, queries)?;
    let m = train.len();
    let n = queries.len();
    let s = gram(spec, &train.x)?;
    let s_cross = cross_gram(spec, queries, &train.x)?;
    let s_query = gram(spec, queries)?;

    let sigma = SymmetricMatrix::new(s)?.add_diagonal(train.noise_sigma.powi(2));
    let fac = factor_symmetric(&sigma)?;

    // columns: y, 1, S*ᵀ
    let mut rhs = DMatrix::zeros(m, 2 + n);
    for i in 0..m {
        rhs[(i, 0)] = train.y[i];
        rhs[(i, 1)] = 1.0;
        for j in 0..n {
            rhs[(i, 2 + j)] = s_cross[(j, i)];
        }
    }
    let sol = fac.solve(&rhs)?;
    let alpha = sol.column(0).into_owned();
    let beta = sol.column(1).into_owned();
    let sinv_scross_t = sol.columns(2, n).into_owned();

    let denom = beta.sum();
    let threshold = 1e-12 * m as f64 * beta.norm() / (m as f64).sqrt();
    if !(denom.abs() >= threshold) || !denom.is_finite() {
        return Err(RegressionError::DegenerateDenominator {
            value: denom,
            threshold,
        });
    }
    let gamma = alpha.sum() / denom;
    let weights = &alpha - &beta * gamma;
    let mean = &s_cross * weights + DVector::from_element(n, gamma);

    let ones = DVector::from_element(n, 1.0);
    let f = match opts.correction {
        CorrectionTerm::Shifted => &ones - &s_cross * &beta,
        CorrectionTerm::Literal { c } => {
            let k_cross = s_cross.add_scalar(c);
            &ones - k_cross * &beta
        }
    };
    let uncorrected = s_query - &s_cross * sinv_scross_t;
    let cov = uncorrected + (&f * f.transpose()) / denom;
    finish(queries, mean, cov, opts.jitter_max, train.noise_sigma)
}

fn finish(
    queries: &Points,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    jitter_max: f64,
    noise_sigma: f64,
) -> Result<PosteriorGaussian, RegressionError> {
    let cov = SymmetricMatrix::symmetrize(cov)?;
    let repaired = psd_repair(&cov, jitter_max)?;
    Ok(PosteriorGaussian {
        queries: queries.clone(),
        mean,
        cov: repaired.matrix,
        jitter_used: repaired.jitter,
        noise_sigma,
    })
}

/// Ordinary zero-mean GP posterior for a positive definite kernel.
pub fn proper_posterior(
    spec: &KernelSpec,
    train: &TrainingSet,
    queries: &Points,
) -> Result<PosteriorGaussian, RegressionError> {
    if !spec.is_proper() {
        return Err(RegressionError::MustUseImproper(spec.label()));
    }
    check_inputs(spec, train, queries)?;
    let k = gram(spec, &train.x)?;
    let k_cross = cross_gram(spec, queries, &train.x)?;
    let k_query = gram(spec, queries)?;
    let ky = SymmetricMatrix::new(k)?.add_diagonal(train.noise_sigma.powi(2));
    let chol = ky
        .into_inner()
        .cholesky()
        .ok_or(RegressionError::NotPositiveDefinite)?;
    let alpha = chol.solve(&DVector::from_column_slice(&train.y));
    let mean = &k_cross * alpha;
    let v = chol.solve(&k_cross.transpose());
    let cov = k_query - &k_cross * v;
    finish(queries, mean, cov, POSTERIOR_JITTER_MAX, train.noise_sigma)
}

/// Ordinary GP posterior with kernel `s + c` at a finite shift `c`, computed
/// by a direct solve. Converges to [`improper_posterior`] as `c` grows.
///
/// The covariance is symmetrized but not repaired (`jitter_used = 0`); the
/// result is a reference value, not something to sample from.
pub fn shifted_posterior_oracle(
    spec: &KernelSpec,
    c: f64,
    train: &TrainingSet,
    queries: &Points,
) -> Result<PosteriorGaussian, RegressionError> {
    check_inputs(spec, train, queries)?;
    let k = gram(spec, &train.x)?.add_scalar(c);
    let k_cross = cross_gram(spec, queries, &train.x)?.add_scalar(c);
    let k_query = gram(spec, queries)?.add_scalar(c);
    let ky = SymmetricMatrix::new(k)?.add_diagonal(train.noise_sigma.powi(2));
    let fac = factor_symmetric(&ky)?;
    let inertia = fac.inertia();
    if inertia.negative > 0 || inertia.zero > 0 {
        return Err(RegressionError::TryLargerC {
            c,
            negative: inertia.negative + inertia.zero,
        });
    }
    let alpha = fac.solve_vec(&DVector::from_column_slice(&train.y))?;
    let mean = &k_cross * alpha;
    let v = fac.solve(&k_cross.transpose())?;
    let cov = SymmetricMatrix::symmetrize(k_query - &k_cross * v)?;
    Ok(PosteriorGaussian {
        queries: queries.clone(),
        mean,
        cov,
        jitter_used: 0.0,
        noise_sigma: train.noise_sigma,
    })
}

/// Whether a kernel is used as an ordinary covariance or through the limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Proper,
    Improper,
}

impl PriorKind {
    /// Proper kernels are used as ordinary GPs, everything else through the
    /// limit posterior.
    pub fn for_spec(spec: &KernelSpec) -> Self {
        if spec.is_proper() {
            PriorKind::Proper
        } else {
            PriorKind::Improper
        }
    }
}

pub fn posterior(
    kind: PriorKind,
    spec: &KernelSpec,
    train: &TrainingSet,
    queries: &Points,
) -> Result<PosteriorGaussian, RegressionError> {
    match kind {
        PriorKind::Proper => proper_posterior(spec, train, queries),
        PriorKind::Improper => improper_posterior(spec, train, queries),
    }
}

/// Log density of all observations except `anchor`, given the anchor
/// observation alone. Finite for improper priors, unlike the full marginal
/// likelihood.
pub fn conditional_log_marginal(
    spec: &KernelSpec,
    train: &TrainingSet,
    anchor: usize,
) -> Result<f64, RegressionError> {
    conditional_log_marginal_with(PriorKind::for_spec(spec), spec, train, anchor)
}

pub fn conditional_log_marginal_with(
    kind: PriorKind,
    spec: &KernelSpec,
    train: &TrainingSet,
    anchor: usize,
) -> Result<f64, RegressionError> {
    let m = train.len();
    if m < 2 {
        return Err(RegressionError::NotEnoughData { need: 2, got: m });
    }
    if anchor >= m {
        return Err(RegressionError::AnchorOutOfRange { anchor, len: m });
    }
    let rest: Vec<usize> = (0..m).filter(|&i| i != anchor).collect();
    let anchored = train.select(&[anchor]);
    let post = posterior(kind, spec, &anchored, &train.x.select(&rest))?;
    let resid = DVector::from_iterator(rest.len(), rest.iter().map(|&i| train.y[i])) - post.mean();
    let cov = post
        .cov()
        .add_diagonal(train.noise_sigma.powi(2))
        .into_inner();
    let chol = cov.cholesky().ok_or(RegressionError::NotPositiveDefinite)?;
    let z = chol
        .l()
        .solve_lower_triangular(&resid)
        .ok_or(RegressionError::NotPositiveDefinite)?;
    let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    let k = rest.len() as f64;
    Ok(-0.5 * (z.norm_squared() + log_det + k * (2.0 * PI).ln()))
}

/// Per-point and aggregate predictive negative log-likelihood.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NllSummary {
    pub per_point: Vec<f64>,
    pub mean: f64,
    pub median: f64,
}

/// Univariate Gaussian NLL of `y_true` under `N(mean_i, cov_ii + σ²)`.
pub fn predictive_nll(
    post: &PosteriorGaussian,
    y_true: &[f64],
) -> Result<NllSummary, RegressionError> {
    if y_true.len() != post.len() {
        return Err(RegressionError::LengthMismatch {
            points: post.len(),
            targets: y_true.len(),
        });
    }
    let s2 = post.noise_sigma.powi(2);
    let mut per_point = Vec::with_capacity(y_true.len());
    for (i, &y) in y_true.iter().enumerate() {
        let var = post.variance(i) + s2;
        if !(var.is_finite() && var > 0.0) {
            return Err(RegressionError::NonFiniteVariance(i));
        }
        let r = y - post.mean[i];
        per_point.push(0.5 * (2.0 * PI * var).ln() + 0.5 * r * r / var);
    }
    let mean = per_point.iter().sum::<f64>() / per_point.len().max(1) as f64;
    let median = median(&per_point);
    Ok(NllSummary {
        per_point,
        mean,
        median,
    })
}

/// Median; the average of the two middle values for even lengths, NaN when
/// empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `count` joint draws `mean + L z` with `z` standard normal from a ChaCha8
/// stream seeded by `seed`.
pub fn sample_posterior(
    post: &PosteriorGaussian,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, RegressionError> {
    let factor = psd_factor(post.cov()).ok_or(LinalgError::NotPsd {
        jitter_max: post.jitter_used,
    })?;
    let l = factor.matrix();
    let n = post.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        let draw = &post.mean + l * z;
        out.push(draw.iter().copied().collect());
    }
    Ok(out)
}
