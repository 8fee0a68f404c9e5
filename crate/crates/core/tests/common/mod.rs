//! Shared fixtures and independent oracles for integration tests.
#![allow(dead_code)]

use improper_gp::kernel::{cross_gram, gram, KernelSpec};
use improper_gp::linalg::{psd_factor, SymmetricMatrix};
use improper_gp::regression::TrainingSet;
use improper_gp::Points;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_points(rng: &mut ChaCha8Rng, n: usize, d: usize, half: f64) -> Points {
    let coords = (0..n * d).map(|_| rng.random_range(-half..half)).collect();
    Points::new(d, coords).unwrap()
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Posterior mean of intrinsic kriging with a constant drift, from the
/// bordered system
///
/// ```text
/// [ S + σ²I  1 ] [w]   [y]
/// [ 1ᵀ       0 ] [b] = [0]
/// ```
///
/// with prediction `S* w + b`. Solved by LU, independent of the library's
/// limit formulas.
pub fn kriging_mean(spec: &KernelSpec, train: &TrainingSet, queries: &Points) -> DVector<f64> {
    let m = train.len();
    let s = gram(spec, train.x()).unwrap();
    let mut a = DMatrix::zeros(m + 1, m + 1);
    a.view_mut((0, 0), (m, m)).copy_from(&s);
    for i in 0..m {
        a[(i, i)] += train.noise_sigma().powi(2);
        a[(i, m)] = 1.0;
        a[(m, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(m + 1);
    rhs.rows_mut(0, m).copy_from_slice(train.y());
    let sol = a.lu().solve(&rhs).expect("bordered system is nonsingular");
    let w = sol.rows(0, m).into_owned();
    let b = sol[m];
    cross_gram(spec, queries, train.x()).unwrap() * w + DVector::from_element(queries.len(), b)
}

/// Joint draw of latent values at `x` from the proper prior `s + shift`.
pub fn sample_shifted_prior(
    spec: &KernelSpec,
    shift: f64,
    x: &Points,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let k = gram(spec, x).unwrap().add_scalar(shift);
    let l = psd_factor(&SymmetricMatrix::new(k).unwrap()).expect("s + shift is PSD");
    let z = DVector::from_vec(normals(rng, x.len()));
    (l.matrix() * z).iter().copied().collect()
}

/// Two-point problem `{−α, α}` with targets `(y_minus, y_plus)`.
pub fn two_point(alpha: f64, y_minus: f64, y_plus: f64, sigma: f64) -> TrainingSet {
    TrainingSet::new(
        Points::from_scalars(&[-alpha, alpha]).unwrap(),
        vec![y_minus, y_plus],
        sigma,
    )
    .unwrap()
}
