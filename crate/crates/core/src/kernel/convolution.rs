//! Quadrature evaluation of `-(|.| * k)(tau)`, the convolution that defines
//! the Matérn Walk and Gaussian Walk kernels. Used to check their closed forms.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use statrs::function::erf::erfc;

use super::{Family, KernelError, KernelSpec, MaternOrder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Largest truncation radius the oracle may use.
    pub max_radius: f64,
    /// Panel width in units of the length scale.
    pub panel_width: f64,
    /// Gauss-Legendre nodes per panel.
    pub nodes: usize,
    /// Bound on the discarded tail mass.
    pub tail_tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            max_radius: 1e4,
            panel_width: 0.25,
            nodes: 16,
            tail_tolerance: 1e-9,
        }
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tail bound for `int_D^inf (a + u) k(u) du`, with `a = |tau|`.
fn tail_bound(family: Family, l: f64, a: f64, d: f64) -> f64 {
    match family {
        Family::SquaredExponential => {
            l * l * (-0.5 * (d / l).powi(2)).exp()
                + a * l * FRAC_PI_2.sqrt() * erfc(d / (SQRT_2 * l))
        }
        Family::Matern(MaternOrder::Half) => l * (d + l) * (-d / l).exp() + a * l * (-d / l).exp(),
        _ => f64::INFINITY,
    }
}

/// Numerically evaluates `-int |w| k(tau - w) dw` for a squared-exponential or
/// Matérn 1/2 kernel `k`.
///
/// The truncation radius grows in steps of one length scale until the
/// analytic bound on both discarded tails is below `tail_tolerance`.
pub fn convolution_oracle(
    proper: &KernelSpec,
    tau: f64,
    cfg: &QuadratureConfig,
) -> Result<f64, KernelError> {
    let fam = proper.family();
    if !matches!(
        fam,
        Family::SquaredExponential | Family::Matern(MaternOrder::Half)
    ) {
        return Err(KernelError::UnsupportedFamily(proper.label()));
    }
    if !tau.is_finite() {
        return Err(KernelError::Domain(format!(
            "lag must be finite, got {tau}"
        )));
    }
    if cfg.nodes == 0 || !(cfg.panel_width > 0.0) {
        return Err(KernelError::OracleFailure("empty quadrature rule".into()));
    }
    let l = proper.length_scale();
    let a = tau.abs();
    let mut dist = l;
    while 2.0 * tail_bound(fam, l, a, dist) > cfg.tail_tolerance {
        dist += l;
        if a + dist > cfg.max_radius {
            return Err(KernelError::OracleFailure(format!(
                "tail bound above {} within radius {}",
                cfg.tail_tolerance, cfg.max_radius
            )));
        }
    }
    let radius = a + dist;

    // Kinks of the integrand sit at w = 0 and w = tau.
    let mut cuts = vec![-radius, 0.0_f64.min(tau), 0.0_f64.max(tau), radius];
    cuts.dedup();
    let (nodes, weights) = gauss_legendre(cfg.nodes);
    let h_max = cfg.panel_width * l;
    let mut acc = 0.0;
    for seg in cuts.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        if hi <= lo {
            continue;
        }
        let panels = ((hi - lo) / h_max).ceil().max(1.0) as usize;
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            let a0 = lo + p as f64 * h;
            let mut part = 0.0;
            for (x, wt) in nodes.iter().zip(&weights) {
                let w = a0 + 0.5 * h * (x + 1.0);
                part += wt * w.abs() * proper.profile((tau - w).abs());
            }
            acc += 0.5 * h * part;
        }
    }
    if !acc.is_finite() {
        return Err(KernelError::OracleFailure(
            "non-finite quadrature sum".into(),
        ));
    }
    Ok(-acc)
}
