//! Dense symmetric linear algebra: pivoted LDLᵀ for indefinite systems,
//! log-determinants with inertia, and PSD repair for sampling.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("matrix has a non-finite entry at ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("matrix is singular to working precision (smallest pivot / max|A| = {pivot_ratio:e})")]
    Singular { pivot_ratio: f64 },
    #[error("matrix is not positive semidefinite even with jitter {jitter_max:e} * max(diag)")]
    NotPsd { jitter_max: f64 },
    #[error("right-hand side has {got} rows, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Pivots smaller than this fraction of `max|A|` are treated as zero.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

/// A square matrix that is bitwise symmetric with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        let (r, c) = m.shape();
        if r != c {
            return Err(LinalgError::NotSquare { rows: r, cols: c });
        }
        for j in 0..c {
            for i in 0..r {
                if !m[(i, j)].is_finite() {
                    return Err(LinalgError::NonFinite { i, j });
                }
                if i < j && m[(i, j)].to_bits() != m[(j, i)].to_bits() {
                    return Err(LinalgError::NotSymmetric { i, j });
                }
            }
        }
        Ok(Self(m))
    }

    /// `(A + Aᵀ) / 2`, which is bitwise symmetric because addition commutes.
    pub fn symmetrize(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        let (r, c) = m.shape();
        if r != c {
            return Err(LinalgError::NotSquare { rows: r, cols: c });
        }
        let t = m.transpose();
        Self::new((m + t) * 0.5)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// `A + v * I`.
    pub fn add_diagonal(&self, v: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += v;
        }
        Self(m)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

/// Eigenvalue sign counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Pivot {
    One(f64),
    Two { a: f64, b: f64, c: f64 },
}

/// Bunch-Kaufman factorization `Aₚ = L D Lᵀ` with `Aₚ = A[perm, perm]`, `L`
/// unit lower triangular and `D` block diagonal with 1x1 and 2x2 blocks.
#[derive(Debug, Clone)]
pub struct Factorization {
    l: DMatrix<f64>,
    perm: Vec<usize>,
    pivots: Vec<(usize, Pivot)>,
    log_abs_det: f64,
    inertia: Inertia,
}

/// Factors a symmetric, possibly indefinite matrix.
pub fn factor_symmetric(a: &SymmetricMatrix) -> Result<Factorization, LinalgError> {
    const ALPHA: f64 = 0.640_388_203_202_208_4; // (1 + sqrt(17)) / 8
    let n = a.n();
    let scale = a.max_abs();
    let tiny = SINGULAR_TOLERANCE * scale;
    let mut w = a.as_matrix().clone();
    let mut l = DMatrix::<f64>::identity(n, n);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut pivots = Vec::with_capacity(n);
    let mut inertia = Inertia::default();
    let mut log_abs_det = 0.0;

    let mut k = 0;
    while k < n {
        let absakk = w[(k, k)].abs();
        let (imax, colmax) =
            ((k + 1)..n)
                .map(|i| (i, w[(i, k)].abs()))
                .fold(
                    (k, 0.0_f64),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );

        let (kp, size) = if absakk.max(colmax) == 0.0 || absakk >= ALPHA * colmax {
            (k, 1)
        } else {
            let rowmax = (k..n)
                .filter(|&j| j != imax)
                .map(|j| w[(imax, j)].abs())
                .fold(0.0_f64, f64::max);
            if absakk * rowmax >= ALPHA * colmax * colmax {
                (k, 1)
            } else if w[(imax, imax)].abs() >= ALPHA * rowmax {
                (imax, 1)
            } else {
                (imax, 2)
            }
        };

        let kk = k + size - 1;
        if kp != kk {
            w.swap_rows(kk, kp);
            w.swap_columns(kk, kp);
            perm.swap(kk, kp);
            // previously computed multipliers follow their rows
            for j in 0..k {
                let tmp = l[(kk, j)];
                l[(kk, j)] = l[(kp, j)];
                l[(kp, j)] = tmp;
            }
        }

        if size == 1 {
            let d = w[(k, k)];
            if d.abs() <= tiny || d == 0.0 {
                return Err(LinalgError::Singular {
                    pivot_ratio: ratio(d.abs(), scale),
                });
            }
            for i in (k + 1)..n {
                l[(i, k)] = w[(i, k)] / d;
            }
            for j in (k + 1)..n {
                let ljd = l[(j, k)] * d;
                for i in j..n {
                    let v = w[(i, j)] - l[(i, k)] * ljd;
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
            if d > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.negative += 1;
            }
            log_abs_det += d.abs().ln();
            pivots.push((k, Pivot::One(d)));
        } else {
            let (a11, a21, a22) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
            let det = a11 * a22 - a21 * a21;
            let (e1, e2) = eig2(a11, a21, a22);
            let small = e1.abs().min(e2.abs());
            if small <= tiny || det == 0.0 {
                return Err(LinalgError::Singular {
                    pivot_ratio: ratio(small, scale),
                });
            }
            for i in (k + 2)..n {
                let (wi1, wi2) = (w[(i, k)], w[(i, k + 1)]);
                l[(i, k)] = (a22 * wi1 - a21 * wi2) / det;
                l[(i, k + 1)] = (a11 * wi2 - a21 * wi1) / det;
            }
            for j in (k + 2)..n {
                let (wj1, wj2) = (w[(j, k)], w[(j, k + 1)]);
                for i in j..n {
                    let v = w[(i, j)] - l[(i, k)] * wj1 - l[(i, k + 1)] * wj2;
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
            for e in [e1, e2] {
                if e > 0.0 {
                    inertia.positive += 1;
                } else {
                    inertia.negative += 1;
                }
            }
            log_abs_det += det.abs().ln();
            pivots.push((
                k,
                Pivot::Two {
                    a: a11,
                    b: a21,
                    c: a22,
                },
            ));
        }
        k += size;
    }
    Ok(Factorization {
        l,
        perm,
        pivots,
        log_abs_det,
        inertia,
    })
}

fn ratio(p: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        p / scale
    } else {
        0.0
    }
}

/// Eigenvalues of `[[a, b], [b, c]]`.
fn eig2(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + c);
    let rad = (0.5 * (a - c)).hypot(b);
    (mean + rad, mean - rad)
}

impl Factorization {
    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
        let n = self.n();
        if b.nrows() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: b.nrows(),
            });
        }
        let mut x = DMatrix::zeros(n, b.ncols());
        let mut z = vec![0.0; n];
        for col in 0..b.ncols() {
            for (r, &p) in self.perm.iter().enumerate() {
                z[r] = b[(p, col)];
            }
            self.solve_permuted(&mut z);
            for (r, &p) in self.perm.iter().enumerate() {
                x[(p, col)] = z[r];
            }
        }
        Ok(x)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        let x = self.solve(&DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
        Ok(x.column(0).into_owned())
    }

    fn solve_permuted(&self, z: &mut [f64]) {
        let n = z.len();
        // L y = z
        for j in 0..n {
            let zj = z[j];
            if zj != 0.0 {
                for i in (j + 1)..n {
                    z[i] -= self.l[(i, j)] * zj;
                }
            }
        }
        // D w = y
        for &(k, p) in &self.pivots {
            match p {
                Pivot::One(d) => z[k] /= d,
                Pivot::Two { a, b, c } => {
                    let det = a * c - b * b;
                    let (u, v) = (z[k], z[k + 1]);
                    z[k] = (c * u - b * v) / det;
                    z[k + 1] = (a * v - b * u) / det;
                }
            }
        }
        // Lᵀ x = w
        for j in (0..n).rev() {
            let mut s = z[j];
            for i in (j + 1)..n {
                s -= self.l[(i, j)] * z[i];
            }
            z[j] = s;
        }
    }
}

/// Square-root factor `L` (rows in the original order) with `A ≈ L Lᵀ`.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    l: DMatrix<f64>,
    rank: usize,
}

impl PsdFactor {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

/// Diagonally pivoted Cholesky that accepts exactly singular PSD matrices.
///
/// Pivots are taken largest-first; once the largest remaining diagonal is
/// within `4 n eps max(diag)` of zero the remaining block must also be that
/// small, otherwise the matrix is indefinite.
pub fn psd_factor(a: &SymmetricMatrix) -> Option<PsdFactor> {
    let n = a.n();
    let mut w = a.as_matrix().clone();
    let scale = (0..n).map(|i| w[(i, i)].abs()).fold(0.0_f64, f64::max);
    let tol = 4.0 * n.max(1) as f64 * f64::EPSILON * scale;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut rank = 0;
    for k in 0..n {
        let (p, dmax) = (k..n)
            .map(|i| (i, w[(i, i)]))
            .fold((k, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        if dmax <= tol {
            let rest_ok = (k..n).all(|i| (k..n).all(|j| w[(i, j)].abs() <= tol));
            if dmax < -tol || !rest_ok {
                return None;
            }
            break;
        }
        if p != k {
            w.swap_rows(k, p);
            w.swap_columns(k, p);
            l.swap_rows(k, p);
            perm.swap(k, p);
        }
        let d = w[(k, k)].sqrt();
        l[(k, k)] = d;
        for i in (k + 1)..n {
            l[(i, k)] = w[(i, k)] / d;
        }
        for j in (k + 1)..n {
            for i in j..n {
                let v = w[(i, j)] - l[(i, k)] * l[(j, k)];
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        rank += 1;
    }
    let mut out = DMatrix::zeros(n, n);
    for (r, &p) in perm.iter().enumerate() {
        out.set_row(p, &l.row(r));
    }
    Some(PsdFactor { l: out, rank })
}

/// Result of [`psd_repair`].
#[derive(Debug, Clone)]
pub struct Repaired {
    pub matrix: SymmetricMatrix,
    /// Absolute jitter added to the diagonal.
    pub jitter: f64,
    pub factor: PsdFactor,
}

/// Relative jitter ladder: 0, 1e-12, 1e-10, ... up to `jitter_max`.
fn ladder(jitter_max: f64) -> Vec<f64> {
    const STEPS: [f64; 7] = [1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0];
    let mut steps = vec![0.0];
    steps.extend(STEPS.iter().copied().filter(|&e| e <= jitter_max));
    if steps.last().is_some_and(|&last| last < jitter_max) {
        steps.push(jitter_max);
    }
    steps
}

/// Adds the smallest ladder jitter `eps * max(diag)` that makes `A` PSD.
pub fn psd_repair(a: &SymmetricMatrix, jitter_max: f64) -> Result<Repaired, LinalgError> {
    let n = a.n();
    let mut scale = (0..n)
        .map(|i| a.as_matrix()[(i, i)])
        .fold(0.0_f64, f64::max);
    if scale <= 0.0 {
        scale = a.max_abs();
    }
    if scale <= 0.0 {
        scale = 1.0;
    }
    for rel in ladder(jitter_max) {
        let jitter = rel * scale;
        let candidate = a.add_diagonal(jitter);
        if let Some(factor) = psd_factor(&candidate) {
            return Ok(Repaired {
                matrix: candidate,
                jitter,
                factor,
            });
        }
    }
    Err(LinalgError::NotPsd { jitter_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{gram, KernelSpec};
    use crate::points::Points;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sym(n: usize, v: &[f64]) -> SymmetricMatrix {
        SymmetricMatrix::new(DMatrix::from_row_slice(n, n, v)).unwrap()
    }

    fn eig_inertia(a: &DMatrix<f64>) -> Inertia {
        let ev = a.clone().symmetric_eigenvalues();
        let mut inr = Inertia::default();
        for v in ev.iter() {
            if *v > 0.0 {
                inr.positive += 1
            } else if *v < 0.0 {
                inr.negative += 1
            } else {
                inr.zero += 1
            }
        }
        inr
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> SymmetricMatrix {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.random_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
            m[(i, i)] += shift;
        }
        SymmetricMatrix::new(m).unwrap()
    }

    #[test]
    fn rejects_asymmetric_and_nonfinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0 + 1e-16 * 4.0, 1.0]);
        assert!(matches!(
            SymmetricMatrix::new(m),
            Err(LinalgError::NotSymmetric { .. })
        ));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(matches!(
            SymmetricMatrix::new(m),
            Err(LinalgError::NonFinite { .. })
        ));
        assert!(matches!(
            SymmetricMatrix::new(DMatrix::zeros(2, 3)),
            Err(LinalgError::NotSquare { .. })
        ));
    }

    #[test]
    fn brownian_pair_is_indefinite() {
        let f = factor_symmetric(&sym(2, &[0.0, -1.0, -1.0, 0.0])).unwrap();
        assert_eq!(
            f.inertia(),
            Inertia {
                positive: 1,
                negative: 1,
                zero: 0
            }
        );
        assert_relative_eq!(f.log_abs_det(), 0.0, epsilon = 1e-15);
        let x = f.solve_vec(&DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_relative_eq!(x[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(x[1], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn identity() {
        let f = factor_symmetric(&SymmetricMatrix::identity(3)).unwrap();
        assert_eq!(
            f.inertia(),
            Inertia {
                positive: 3,
                negative: 0,
                zero: 0
            }
        );
        assert_eq!(f.log_abs_det(), 0.0);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(f.solve(&b).unwrap(), b);
    }

    #[test]
    fn smooth_walk_gram_has_one_negative_eigenvalue() {
        let ts: Vec<f64> = (0..20).map(|i| -1.0 + 2.0 * i as f64 / 19.0).collect();
        let g = gram(
            &KernelSpec::smooth_walk(0.2).unwrap(),
            &Points::from_scalars(&ts).unwrap(),
        )
        .unwrap();
        let a = SymmetricMatrix::new(g).unwrap().add_diagonal(0.01);
        let oracle = eig_inertia(a.as_matrix());
        assert_eq!(oracle.negative, 1);
        assert_eq!(factor_symmetric(&a).unwrap().inertia(), oracle);
    }

    #[test]
    fn singular_matrix_reports_pivot_ratio() {
        let err = factor_symmetric(&sym(2, &[1.0, 1.0, 1.0, 1.0])).unwrap_err();
        match err {
            LinalgError::Singular { pivot_ratio } => assert!(pivot_ratio < 1e-12),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            factor_symmetric(&sym(2, &[0.0, 0.0, 0.0, 0.0])),
            Err(LinalgError::Singular { .. })
        ));
    }

    #[test]
    fn solve_matches_lu_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_symmetric(&mut rng, 8, 3.0);
            let b = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
            let x = factor_symmetric(&a).unwrap().solve_vec(&b).unwrap();
            let oracle = a.as_matrix().clone().lu().solve(&b).unwrap();
            assert!((x - oracle).amax() <= 1e-10);
        }
    }

    #[test]
    fn inertia_and_logdet_match_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 2, 3, 7, 20, 50] {
            for shift in [-0.5, 0.0, 0.5] {
                let a = random_symmetric(&mut rng, n, shift);
                let f = factor_symmetric(&a).unwrap();
                assert_eq!(f.inertia(), eig_inertia(a.as_matrix()), "n={n}");
                let ld: f64 = a
                    .as_matrix()
                    .clone()
                    .symmetric_eigenvalues()
                    .iter()
                    .map(|v| v.abs().ln())
                    .sum();
                assert_relative_eq!(f.log_abs_det(), ld, epsilon = 1e-8, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn residual_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in [5, 30, 60] {
            let a = random_symmetric(&mut rng, n, 0.0);
            let f = factor_symmetric(&a).unwrap();
            let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let x = f.solve_vec(&b).unwrap();
            let r = (a.as_matrix() * &x - &b).amax();
            let norm_a = (0..n)
                .map(|i| a.as_matrix().row(i).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max);
            assert!(r <= 1e-10 * (norm_a * x.amax() + b.amax()), "n={n} r={r}");
        }
    }

    #[test]
    fn psd_repair_examples() {
        let r = psd_repair(&SymmetricMatrix::identity(3), 1e-6).unwrap();
        assert_eq!(r.jitter, 0.0);
        let r = psd_repair(&sym(2, &[1.0, 1.0, 1.0, 1.0]), 1e-6).unwrap();
        assert_eq!(r.jitter, 0.0);
        assert_eq!(r.factor.rank(), 1);
        // smallest eigenvalue -1e-13: first ladder step that lifts it is 1e-12
        let a = sym(2, &[1.0, 0.0, 0.0, -1e-13]);
        let r = psd_repair(&a, 1e-6).unwrap();
        let lifted = a.as_matrix()[(1, 1)] + r.jitter;
        assert!(r.jitter >= 1e-13 && lifted >= 0.0);
        assert_eq!(r.jitter, 1e-12);
        assert!(matches!(
            psd_repair(&sym(2, &[1.0, 0.0, 0.0, -1e-3]), 1e-6),
            Err(LinalgError::NotPsd { .. })
        ));
    }

    #[test]
    fn psd_repair_is_idempotent_on_psd_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let b = DMatrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
            let a = SymmetricMatrix::symmetrize(&b * b.transpose()).unwrap();
            let r = psd_repair(&a, 1e-6).unwrap();
            assert_eq!(r.jitter, 0.0);
            let back = r.factor.matrix() * r.factor.matrix().transpose();
            assert!((back - a.as_matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn ladder_steps() {
        assert_eq!(ladder(1e-6), vec![0.0, 1e-12, 1e-10, 1e-8, 1e-6]);
        assert_eq!(ladder(0.0), vec![0.0]);
    }
}
