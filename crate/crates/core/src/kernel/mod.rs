//! Kernel catalogue: proper covariance functions and conditionally positive
//! definite (improper) stationary kernels.
//!
//! Stationary families are written as a function of the lag `tau` and lifted
//! to `R^d` through the Euclidean distance. The two bilateral Brownian
//! families are one-dimensional and non-stationary.

mod convolution;
mod spectral;

use std::f64::consts::{FRAC_2_PI, SQRT_2};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use thiserror::Error;

pub use convolution::{convolution_oracle, gauss_legendre, QuadratureConfig};
pub use spectral::spectral_density;

use crate::points::Points;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel family {0} is not supported by this operation")]
    UnsupportedFamily(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("family {family} is defined on the real line only, got d = {dim}")]
    NotOneDimensional { family: String, dim: usize },
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error("spectral density of {0} is singular at omega = 0")]
    Singularity(String),
    #[error("convolution oracle failed: {0}")]
    OracleFailure(String),
}

/// Half-integer Matérn smoothness orders with closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaternOrder {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl MaternOrder {
    pub fn nu(self) -> f64 {
        match self {
            MaternOrder::Half => 0.5,
            MaternOrder::ThreeHalves => 1.5,
            MaternOrder::FiveHalves => 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    SquaredExponential,
    Matern(MaternOrder),
    BrownianCpd,
    SmoothWalk,
    MaternWalk12,
    GaussianWalk,
    PowerLaw { p: f64 },
    BilateralBrownian { t0: f64 },
    TwoPointBrownian { c: f64 },
}

impl Family {
    /// Positive definite families. Everything else is only conditionally
    /// positive definite and must go through the improper posterior.
    pub fn is_proper(&self) -> bool {
        matches!(
            self,
            Family::SquaredExponential
                | Family::Matern(_)
                | Family::BilateralBrownian { .. }
                | Family::TwoPointBrownian { .. }
        )
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(
            self,
            Family::BilateralBrownian { .. } | Family::TwoPointBrownian { .. }
        )
    }

    pub fn uses_length_scale(&self) -> bool {
        self.is_stationary()
    }

    /// Identifier used in the JSON representation.
    pub fn tag(&self) -> &'static str {
        match self {
            Family::SquaredExponential => "squared_exponential",
            Family::Matern(MaternOrder::Half) => "matern12",
            Family::Matern(MaternOrder::ThreeHalves) => "matern32",
            Family::Matern(MaternOrder::FiveHalves) => "matern52",
            Family::BrownianCpd => "brownian",
            Family::SmoothWalk => "smooth_walk",
            Family::MaternWalk12 => "matern_walk12",
            Family::GaussianWalk => "gaussian_walk",
            Family::PowerLaw { .. } => "power_law",
            Family::BilateralBrownian { .. } => "bilateral_brownian",
            Family::TwoPointBrownian { .. } => "two_point_brownian",
        }
    }
}

/// A kernel family together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecJson", into = "KernelSpecJson")]
pub struct KernelSpec {
    family: Family,
    length_scale: f64,
}

impl KernelSpec {
    pub fn new(family: Family, length_scale: f64) -> Result<Self, KernelError> {
        if !(length_scale.is_finite() && length_scale > 0.0) {
            return Err(KernelError::InvalidParameter(format!(
                "length scale must be positive and finite, got {length_scale}"
            )));
        }
        match family {
            Family::PowerLaw { p } if !(p > 0.0 && p < 2.0) => {
                return Err(KernelError::InvalidParameter(format!(
                    "power-law exponent must lie in (0, 2), got {p}"
                )))
            }
            Family::BilateralBrownian { t0 } if !t0.is_finite() => {
                return Err(KernelError::InvalidParameter(format!("t0 = {t0}")))
            }
            Family::TwoPointBrownian { c } if !(c.is_finite() && c > 0.0) => {
                return Err(KernelError::InvalidParameter(format!(
                    "two-point Brownian offset must be positive, got {c}"
                )))
            }
            _ => {}
        }
        Ok(Self {
            family,
            length_scale,
        })
    }

    pub fn squared_exponential(l: f64) -> Result<Self, KernelError> {
        Self::new(Family::SquaredExponential, l)
    }
    pub fn matern(order: MaternOrder, l: f64) -> Result<Self, KernelError> {
        Self::new(Family::Matern(order), l)
    }
    pub fn brownian() -> Self {
        Self {
            family: Family::BrownianCpd,
            length_scale: 1.0,
        }
    }
    pub fn smooth_walk(l: f64) -> Result<Self, KernelError> {
        Self::new(Family::SmoothWalk, l)
    }
    pub fn matern_walk12(l: f64) -> Result<Self, KernelError> {
        Self::new(Family::MaternWalk12, l)
    }
    pub fn gaussian_walk(l: f64) -> Result<Self, KernelError> {
        Self::new(Family::GaussianWalk, l)
    }
    pub fn power_law(p: f64) -> Result<Self, KernelError> {
        Self::new(Family::PowerLaw { p }, 1.0)
    }
    pub fn bilateral_brownian(t0: f64) -> Result<Self, KernelError> {
        Self::new(Family::BilateralBrownian { t0 }, 1.0)
    }
    pub fn two_point_brownian(c: f64) -> Result<Self, KernelError> {
        Self::new(Family::TwoPointBrownian { c }, 1.0)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn is_proper(&self) -> bool {
        self.family.is_proper()
    }

    /// Same family with a different length scale.
    pub fn with_length_scale(&self, l: f64) -> Result<Self, KernelError> {
        Self::new(self.family, l)
    }

    /// Short human-readable label, e.g. `smooth_walk` or `power_law(p=0.5)`.
    pub fn label(&self) -> String {
        match self.family {
            Family::PowerLaw { p } => format!("power_law(p={p})"),
            Family::BilateralBrownian { t0 } => format!("bilateral_brownian(t0={t0})"),
            Family::TwoPointBrownian { c } => format!("two_point_brownian(c={c})"),
            f => f.tag().to_string(),
        }
    }

    /// Value of a stationary family at lag `tau`.
    pub fn eval_stationary(&self, tau: f64) -> Result<f64, KernelError> {
        if !self.family.is_stationary() {
            return Err(KernelError::UnsupportedFamily(self.label()));
        }
        if !tau.is_finite() {
            return Err(KernelError::Domain(format!(
                "lag must be finite, got {tau}"
            )));
        }
        Ok(self.profile(tau.abs()))
    }

    /// Stationary profile as a function of the distance `r >= 0`.
    fn profile(&self, r: f64) -> f64 {
        let l = self.length_scale;
        match self.family {
            Family::SquaredExponential => (-0.5 * (r / l).powi(2)).exp(),
            Family::Matern(MaternOrder::Half) => (-r / l).exp(),
            Family::Matern(MaternOrder::ThreeHalves) => {
                let a = 3f64.sqrt() * r / l;
                (1.0 + a) * (-a).exp()
            }
            Family::Matern(MaternOrder::FiveHalves) => {
                let a = 5f64.sqrt() * r / l;
                (1.0 + a + a * a / 3.0) * (-a).exp()
            }
            Family::BrownianCpd => -r / l,
            Family::SmoothWalk => -r * (r / l).tanh(),
            Family::MaternWalk12 => -2.0 * (r + l * (-r / l).exp()),
            Family::GaussianWalk => {
                -FRAC_2_PI.sqrt() * l * (-0.5 * (r / l).powi(2)).exp() - r * erf(r / (SQRT_2 * l))
            }
            Family::PowerLaw { p } => -(r / l).powf(p),
            Family::BilateralBrownian { .. } | Family::TwoPointBrownian { .. } => {
                unreachable!("profile called on a non-stationary family")
            }
        }
    }

    /// Kernel value between two points of equal dimension.
    pub fn eval_pair(&self, x: &[f64], x2: &[f64]) -> Result<f64, KernelError> {
        if x.len() != x2.len() {
            return Err(KernelError::DimensionMismatch {
                left: x.len(),
                right: x2.len(),
            });
        }
        if x.is_empty() {
            return Err(KernelError::Domain(
                "points must have dimension >= 1".into(),
            ));
        }
        match self.family {
            Family::BilateralBrownian { t0 } => {
                let (t, t2) = self.scalar_pair(x, x2)?;
                Ok(bilateral(t0, t, t2))
            }
            Family::TwoPointBrownian { c } => {
                // Equals c - |t2 - t| on (-c, c).
                let (t, t2) = self.scalar_pair(x, x2)?;
                Ok(bilateral(c, t, t2) + bilateral(-c, t, t2) - c)
            }
            _ => Ok(self.profile(euclidean(x, x2))),
        }
    }

    fn scalar_pair(&self, x: &[f64], x2: &[f64]) -> Result<(f64, f64), KernelError> {
        if x.len() != 1 {
            return Err(KernelError::NotOneDimensional {
                family: self.label(),
                dim: x.len(),
            });
        }
        Ok((x[0], x2[0]))
    }

    /// Checks that the family can be evaluated on points of dimension `d`.
    pub fn check_dim(&self, d: usize) -> Result<(), KernelError> {
        if !self.family.is_stationary() && d != 1 {
            return Err(KernelError::NotOneDimensional {
                family: self.label(),
                dim: d,
            });
        }
        Ok(())
    }
}

fn bilateral(t0: f64, t: f64, t2: f64) -> f64 {
    0.5 * ((t - t0).abs() + (t2 - t0).abs() - (t2 - t).abs())
}

/// Euclidean distance; `(a - b)^2 == (b - a)^2` in IEEE arithmetic, so this is
/// exactly symmetric.
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.family.uses_length_scale() {
            write!(f, "{}(l={})", self.label(), self.length_scale)
        } else {
            f.write_str(&self.label())
        }
    }
}

/// Anything that can be evaluated on a pair of points. Implemented by
/// [`KernelSpec`] and by test-only control kernels.
pub trait Covariance: Sync {
    fn covariance(&self, x: &[f64], x2: &[f64]) -> Result<f64, KernelError>;
}

impl Covariance for KernelSpec {
    fn covariance(&self, x: &[f64], x2: &[f64]) -> Result<f64, KernelError> {
        self.eval_pair(x, x2)
    }
}

/// Symmetric Gram matrix; the upper triangle is computed and mirrored.
pub fn gram<K: Covariance + ?Sized>(k: &K, xs: &Points) -> Result<DMatrix<f64>, KernelError> {
    let m = xs.len();
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = k.covariance(xs.row(i), xs.row(j))?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Cross-covariance between query points (rows) and training points (columns).
pub fn cross_gram<K: Covariance + ?Sized>(
    k: &K,
    queries: &Points,
    xs: &Points,
) -> Result<DMatrix<f64>, KernelError> {
    if queries.dim() != xs.dim() {
        return Err(KernelError::DimensionMismatch {
            left: queries.dim(),
            right: xs.dim(),
        });
    }
    let mut g = DMatrix::zeros(queries.len(), xs.len());
    for i in 0..queries.len() {
        for j in 0..xs.len() {
            g[(i, j)] = k.covariance(queries.row(i), xs.row(j))?;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSpecJson {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
}

impl TryFrom<KernelSpecJson> for KernelSpec {
    type Error = KernelError;

    fn try_from(j: KernelSpecJson) -> Result<Self, Self::Error> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| {
                KernelError::InvalidParameter(format!("family {} requires \"{name}\"", j.family))
            })
        };
        let family = match j.family.as_str() {
            "squared_exponential" => Family::SquaredExponential,
            "matern12" => Family::Matern(MaternOrder::Half),
            "matern32" => Family::Matern(MaternOrder::ThreeHalves),
            "matern52" => Family::Matern(MaternOrder::FiveHalves),
            "brownian" => Family::BrownianCpd,
            "smooth_walk" => Family::SmoothWalk,
            "matern_walk12" => Family::MaternWalk12,
            "gaussian_walk" => Family::GaussianWalk,
            "power_law" => Family::PowerLaw { p: need(j.p, "p")? },
            "bilateral_brownian" => Family::BilateralBrownian {
                t0: need(j.t0, "t0")?,
            },
            "two_point_brownian" => Family::TwoPointBrownian { c: need(j.c, "c")? },
            other => return Err(KernelError::UnsupportedFamily(other.to_string())),
        };
        KernelSpec::new(family, j.length_scale.unwrap_or(1.0))
    }
}

impl From<KernelSpec> for KernelSpecJson {
    fn from(k: KernelSpec) -> Self {
        let mut j = KernelSpecJson {
            family: k.family.tag().to_string(),
            length_scale: k.family.uses_length_scale().then_some(k.length_scale),
            p: None,
            t0: None,
            c: None,
        };
        match k.family {
            Family::PowerLaw { p } => j.p = Some(p),
            Family::BilateralBrownian { t0 } => j.t0 = Some(t0),
            Family::TwoPointBrownian { c } => j.c = Some(c),
            _ => {}
        }
        j
    }
}

/// Every family in the catalogue with default parameters (`l = 1`, `p = 1`,
/// `t0 = 0`, `c = 1`).
pub fn catalogue() -> Vec<KernelSpec> {
    let fams = [
        Family::SquaredExponential,
        Family::Matern(MaternOrder::Half),
        Family::Matern(MaternOrder::ThreeHalves),
        Family::Matern(MaternOrder::FiveHalves),
        Family::BrownianCpd,
        Family::SmoothWalk,
        Family::MaternWalk12,
        Family::GaussianWalk,
        Family::PowerLaw { p: 1.5 },
        Family::BilateralBrownian { t0: 0.0 },
        Family::TwoPointBrownian { c: 1.0 },
    ];
    fams.into_iter()
        .map(|f| KernelSpec::new(f, 1.0).expect("catalogue defaults are valid"))
        .collect()
}
