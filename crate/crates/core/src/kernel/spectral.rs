//! One-dimensional spectral densities (unitary Fourier convention,
//! `1/sqrt(2 pi)` in front of the transform). Diagnostic only.

use std::f64::consts::{FRAC_2_PI, PI};

use statrs::function::gamma::gamma;

use super::{Family, KernelError, KernelSpec, MaternOrder};

/// Spectral density of a stationary family at angular frequency `omega`.
///
/// Improper families have a non-integrable `omega^-2`-type singularity at the
/// origin; asking for `omega = 0` is an error rather than an infinity.
pub fn spectral_density(spec: &KernelSpec, omega: f64) -> Result<f64, KernelError> {
    let fam = spec.family();
    if !fam.is_stationary() {
        return Err(KernelError::UnsupportedFamily(spec.label()));
    }
    if !omega.is_finite() {
        return Err(KernelError::Domain(format!(
            "omega must be finite, got {omega}"
        )));
    }
    if !fam.is_proper() && omega == 0.0 {
        return Err(KernelError::Singularity(spec.label()));
    }
    let l = spec.length_scale();
    let w = omega.abs();
    let v = match fam {
        Family::SquaredExponential => se_density(l, w),
        Family::Matern(order) => matern_density(order, l, w),
        Family::BrownianCpd => FRAC_2_PI.sqrt() / (l * w * w),
        Family::PowerLaw { p } => {
            gamma(p + 1.0) * (0.5 * PI * p).sin() * FRAC_2_PI.sqrt() / (l.powf(p) * w.powf(p + 1.0))
        }
        Family::SmoothWalk => {
            let x = 0.5 * l * w * PI;
            PI.powf(1.5) / (2.0 * 2f64.sqrt()) * l * l * coth_over_sinh(x)
        }
        Family::MaternWalk12 => {
            FRAC_2_PI.sqrt() * matern_density(MaternOrder::Half, l, w) / (w * w)
        }
        Family::GaussianWalk => FRAC_2_PI.sqrt() * se_density(l, w) / (w * w),
        Family::BilateralBrownian { .. } | Family::TwoPointBrownian { .. } => unreachable!(),
    };
    Ok(v)
}

fn se_density(l: f64, w: f64) -> f64 {
    l * (-0.5 * (l * w).powi(2)).exp()
}

/// Unitary transform of the unit-variance Matérn kernel in one dimension.
fn matern_density(order: MaternOrder, l: f64, w: f64) -> f64 {
    let nu = order.nu();
    let lam2 = 2.0 * nu / (l * l);
    // 2 sqrt(pi) Gamma(nu + 1/2) / Gamma(nu) * lam^(2 nu) * (lam^2 + w^2)^-(nu + 1/2)
    let nonunitary = 2.0 * PI.sqrt() * gamma(nu + 0.5) / gamma(nu)
        * lam2.powf(nu)
        * (lam2 + w * w).powf(-(nu + 0.5));
    nonunitary / (2.0 * PI).sqrt()
}

/// `coth(x) / sinh(x)` for `x > 0`, written to avoid overflow.
fn coth_over_sinh(x: f64) -> f64 {
    let e = (-x).exp();
    let e2 = e * e;
    2.0 * e * (1.0 + e2) / ((1.0 - e2) * (1.0 - e2))
}
