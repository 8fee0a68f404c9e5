//! Numerical checks of conditional positive definiteness.
//!
//! A kernel is conditionally positive definite when `wᵀSw ≥ 0` for every
//! Gram matrix `S` and every `w` with `Σ w_i = 0`. Two checks are provided: a
//! Monte Carlo search over random zero-mean vectors, and an exact
//! per-point-set certificate, the smallest eigenvalue of `S` restricted to
//! the complement of the constant vector.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kernel::{euclidean, gram, Covariance, KernelError};
use crate::points::Points;

/// Relative tolerance on quadratic forms, in units of `max|S| · max‖w‖²`.
pub const QUADFORM_TOLERANCE: f64 = 1e-8;

/// Largest point set accepted by [`constrained_eig_check`].
pub const MAX_CERTIFICATE_POINTS: usize = 200;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("certificate limited to {max} points, got {got}")]
    TooManyPoints { got: usize, max: usize },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// `s(x, x') = +|x − x'|`, the negated Brownian kernel. Not conditionally
/// positive definite; used to confirm the checks can fail.
#[derive(Debug, Clone, Copy, Default)]
pub struct NegatedBrownian;

impl Covariance for NegatedBrownian {
    fn covariance(&self, x: &[f64], x2: &[f64]) -> Result<f64, KernelError> {
        if x.len() != x2.len() {
            return Err(KernelError::DimensionMismatch {
                left: x.len(),
                right: x2.len(),
            });
        }
        Ok(euclidean(x, x2))
    }
}

/// How random test vectors are normalized before the quadratic form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VectorNormalization {
    /// Subtract the vector's mean and divide by its standard deviation.
    #[default]
    ZScore,
    /// Use the raw standard-normal draw. Violates the zero-sum constraint.
    Raw,
}

/// Minimum quadratic form found for one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadformResult {
    pub dim: usize,
    pub min_quadform: f64,
    /// `max|S| · max‖w‖²`.
    pub scale: f64,
    /// Certificate on the same point set.
    pub min_constrained_eig: f64,
}

impl QuadformResult {
    pub fn violates(&self, tolerance: f64) -> bool {
        self.min_quadform < -tolerance * self.scale
    }
}

fn uniform_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Points {
    let coords = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    Points::new(d, coords).expect("finite coordinates")
}

fn test_vectors(
    rng: &mut ChaCha8Rng,
    n: usize,
    count: usize,
    norm: VectorNormalization,
) -> DMatrix<f64> {
    let mut w: DMatrix<f64> = DMatrix::from_fn(n, count, |_, _| StandardNormal.sample(rng));
    if norm == VectorNormalization::ZScore {
        for mut col in w.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
            let sd = (col.norm_squared() / (n as f64 - 1.0)).sqrt();
            if sd > 0.0 {
                col /= sd;
            }
        }
    }
    w
}

fn rng_for(seed: u64, dim: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(dim as u64);
    rng
}

/// Monte Carlo search for a negative quadratic form on `n_points` uniform
/// points in `(−1, 1)^d`. Deterministic in `(seed, d)`.
pub fn cpd_numerical_test<K: Covariance + ?Sized>(
    kernel: &K,
    d: usize,
    n_points: usize,
    n_vectors: usize,
    seed: u64,
) -> Result<QuadformResult, ValidationError> {
    cpd_numerical_test_with(
        kernel,
        d,
        n_points,
        n_vectors,
        seed,
        VectorNormalization::ZScore,
    )
}

pub fn cpd_numerical_test_with<K: Covariance + ?Sized>(
    kernel: &K,
    d: usize,
    n_points: usize,
    n_vectors: usize,
    seed: u64,
    norm: VectorNormalization,
) -> Result<QuadformResult, ValidationError> {
    if n_points < 2 {
        return Err(ValidationError::TooFewPoints(n_points));
    }
    let mut rng = rng_for(seed, d);
    let x = uniform_points(&mut rng, n_points, d);
    let s = gram(kernel, &x)?;
    let w = test_vectors(&mut rng, n_points, n_vectors, norm);
    let sw = &s * &w;
    let mut min_quadform = f64::INFINITY;
    let mut max_norm2: f64 = 0.0;
    for (wc, swc) in w.column_iter().zip(sw.column_iter()) {
        min_quadform = min_quadform.min(wc.dot(&swc));
        max_norm2 = max_norm2.max(wc.norm_squared());
    }
    let min_constrained_eig = if n_points <= MAX_CERTIFICATE_POINTS {
        constrained_min_eig(&s)
    } else {
        f64::NAN
    };
    Ok(QuadformResult {
        dim: d,
        min_quadform,
        scale: s.amax() * max_norm2,
        min_constrained_eig,
    })
}

/// Results of [`min_quadform_curve`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub kernel: String,
    pub dims: Vec<usize>,
    pub matrix_size: usize,
    pub vector_count: usize,
    pub seed: u64,
    pub per_dim: Vec<QuadformResult>,
    pub violation: bool,
    pub tolerance: f64,
}

impl ValidationReport {
    pub fn min_quadform_per_dim(&self) -> Vec<f64> {
        self.per_dim.iter().map(|r| r.min_quadform).collect()
    }

    /// CSV with columns `dim,min_quadform,min_constrained_eig,n_points,n_vectors,seed`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ValidationError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "dim",
            "min_quadform",
            "min_constrained_eig",
            "n_points",
            "n_vectors",
            "seed",
        ])?;
        for r in &self.per_dim {
            w.write_record([
                r.dim.to_string(),
                format!("{:e}", r.min_quadform),
                format!("{:e}", r.min_constrained_eig),
                self.matrix_size.to_string(),
                self.vector_count.to_string(),
                self.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs [`cpd_numerical_test`] for every dimension in `dims`, in parallel.
pub fn min_quadform_curve<K: Covariance + ?Sized>(
    kernel: &K,
    label: &str,
    dims: &[usize],
    n_points: usize,
    n_vectors: usize,
    seed: u64,
) -> Result<ValidationReport, ValidationError> {
    let per_dim = dims
        .par_iter()
        .map(|&d| cpd_numerical_test(kernel, d, n_points, n_vectors, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let violation = per_dim.iter().any(|r| r.violates(QUADFORM_TOLERANCE));
    Ok(ValidationReport {
        kernel: label.to_string(),
        dims: dims.to_vec(),
        matrix_size: n_points,
        vector_count: n_vectors,
        seed,
        per_dim,
        violation,
        tolerance: QUADFORM_TOLERANCE,
    })
}

/// Smallest eigenvalue of the Gram matrix on `x` restricted to vectors that
/// sum to zero. `+inf` for fewer than two points, where that space is empty.
pub fn constrained_eig_check<K: Covariance + ?Sized>(
    kernel: &K,
    x: &Points,
) -> Result<f64, ValidationError> {
    if x.len() > MAX_CERTIFICATE_POINTS {
        return Err(ValidationError::TooManyPoints {
            got: x.len(),
            max: MAX_CERTIFICATE_POINTS,
        });
    }
    let s = gram(kernel, x)?;
    Ok(constrained_min_eig(&s))
}

fn constrained_min_eig(s: &DMatrix<f64>) -> f64 {
    let m = s.nrows();
    if m < 2 {
        return f64::INFINITY;
    }
    // Householder reflection H with H e₁ = 1/√m; its last m−1 columns are an
    // orthonormal basis of the zero-sum subspace.
    let mut v = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    v[0] -= 1.0;
    let h = DMatrix::identity(m, m) - (&v * v.transpose()) * (2.0 / v.norm_squared());
    let q = h.columns(1, m - 1).into_owned();
    let projected = q.transpose() * s * &q;
    let projected = (&projected + projected.transpose()) * 0.5;
    SymmetricEigen::new(projected).eigenvalues.min()
}
