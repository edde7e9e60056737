use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::{Family, Sides, TestModel};
use crate::error::{Error, Result};
use crate::mathcore::{normal, Quadrature};

/// Prior (or power weight function) on θ under the alternative.
///
/// Parameters are on the model's effect scale: θ for mean families and the
/// alternative variance for the variance family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorSpec {
    PointMass { theta: f64 },
    UniformInterval { lo: f64, hi: f64 },
    NormalPrior { mean: f64, sd: f64 },
    GridWeight { points: Vec<f64>, weights: Vec<f64> },
    /// Resolved per model by [`crate::evidence::intrinsic_prior`].
    Intrinsic,
    /// Supremum over point masses.
    EmpiricalBayesAll,
    /// Maximum over uniform priors on `[θ₀, θ₀ + a]`.
    EmpiricalBayesNonincreasing,
}

/// Where a prior is being used; design effects may sit at the null.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorUse {
    Design,
    Evidence,
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl PriorSpec {
    pub fn point(theta: f64) -> Self {
        PriorSpec::PointMass { theta }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        PriorSpec::UniformInterval { lo, hi }
    }

    pub fn normal(mean: f64, sd: f64) -> Self {
        PriorSpec::NormalPrior { mean, sd }
    }

    pub fn grid(points: Vec<f64>, weights: Vec<f64>) -> Self {
        PriorSpec::GridWeight { points, weights }
    }

    pub fn is_data_dependent(&self) -> bool {
        matches!(
            self,
            PriorSpec::EmpiricalBayesAll | PriorSpec::EmpiricalBayesNonincreasing
        )
    }

    /// Checks parameter constraints that do not depend on a model.
    pub fn validate_shape(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(format!("{what} must be finite")))
            }
        };
        match self {
            PriorSpec::PointMass { theta } => finite(*theta, "point mass location"),
            PriorSpec::UniformInterval { lo, hi } => {
                finite(*lo, "uniform lower end")?;
                finite(*hi, "uniform upper end")?;
                if lo < hi {
                    Ok(())
                } else {
                    Err(Error::domain(format!("uniform prior needs lo < hi, got ({lo}, {hi})")))
                }
            }
            PriorSpec::NormalPrior { mean, sd } => {
                finite(*mean, "normal prior mean")?;
                if *sd > 0.0 && sd.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain(format!("normal prior sd must be positive, got {sd}")))
                }
            }
            PriorSpec::GridWeight { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(Error::domain(
                        "grid prior needs equally many points and weights (at least one)",
                    ));
                }
                for &p in points {
                    finite(p, "grid point")?;
                }
                if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return Err(Error::domain("grid weights must be non-negative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(Error::domain(format!("grid weights must sum to 1, got {total}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Full validation against a model.
    ///
    /// Under [`PriorUse::Evidence`] a point mass at the null is rejected and,
    /// for one-sided mean models, bounded priors must live on `[θ₀, ∞)`.
    pub fn validate_for(&self, model: &TestModel, usage: PriorUse) -> Result<()> {
        model.validate()?;
        self.validate_shape()?;
        let theta0 = model.null_value;
        if model.family == Family::NormalVariance {
            let positive = |v: f64| {
                if v > 0.0 {
                    Ok(())
                } else {
                    Err(Error::domain(format!(
                        "variance-family prior support must be positive, got {v}"
                    )))
                }
            };
            match self {
                PriorSpec::PointMass { theta } => positive(*theta)?,
                PriorSpec::UniformInterval { lo, .. } => positive(*lo)?,
                PriorSpec::GridWeight { points, .. } => {
                    for &p in points {
                        positive(p)?;
                    }
                }
                PriorSpec::NormalPrior { .. } => {
                    return Err(Error::domain(
                        "a normal prior puts mass on negative variances",
                    ))
                }
                PriorSpec::Intrinsic | PriorSpec::EmpiricalBayesNonincreasing => {
                    return Err(Error::UnsupportedModel(format!(
                        "{self} is only defined for mean families"
                    )))
                }
                PriorSpec::EmpiricalBayesAll => {}
            }
        }
        if usage == PriorUse::Evidence {
            if let PriorSpec::PointMass { theta } = self {
                if *theta == theta0 {
                    return Err(Error::domain(
                        "the alternative prior may not be a point mass at the null value",
                    ));
                }
            }
            if model.family.is_mean() && model.sides == Sides::OneSidedUpper {
                let below = match self {
                    PriorSpec::PointMass { theta } => *theta < theta0,
                    PriorSpec::UniformInterval { lo, .. } => *lo < theta0,
                    PriorSpec::GridWeight { points, .. } => points.iter().any(|&p| p < theta0),
                    _ => false,
                };
                if below {
                    return Err(Error::domain(format!(
                        "one-sided alternative: prior support must lie at or above the null {theta0}"
                    )));
                }
            }
        }
        if usage == PriorUse::Design && self.is_data_dependent() {
            return Err(Error::domain(format!(
                "{self} depends on the data and cannot serve as a design effect"
            )));
        }
        Ok(())
    }

    /// Density for continuous priors; `None` for atoms and unresolved variants.
    pub fn density(&self, theta: f64) -> Option<f64> {
        match self {
            PriorSpec::UniformInterval { lo, hi } => Some(if theta >= *lo && theta <= *hi {
                1.0 / (hi - lo)
            } else {
                0.0
            }),
            PriorSpec::NormalPrior { mean, sd } => Some(normal::density(theta, *mean, *sd)),
            _ => None,
        }
    }

    /// Support endpoints, infinite for the normal prior.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            PriorSpec::PointMass { theta } => Some((*theta, *theta)),
            PriorSpec::UniformInterval { lo, hi } => Some((*lo, *hi)),
            PriorSpec::NormalPrior { .. } => Some((f64::NEG_INFINITY, f64::INFINITY)),
            PriorSpec::GridWeight { points, .. } => {
                let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Some((lo, hi))
            }
            _ => None,
        }
    }

    /// ∫ g(θ) π(θ) dθ for a concrete (resolved) prior.
    ///
    /// Atoms and grids are exact weighted sums; continuous priors use the
    /// adaptive quadrature.
    pub fn expectation<G: Fn(f64) -> f64>(&self, g: G, cfg: &Quadrature) -> Result<f64> {
        match self {
            PriorSpec::PointMass { theta } => Ok(g(*theta)),
            PriorSpec::UniformInterval { lo, hi } => {
                let width = hi - lo;
                Ok(cfg.integrate(&g, *lo, *hi)? / width)
            }
            PriorSpec::NormalPrior { mean, sd } => cfg.integrate_around(
                |t| g(t) * normal::density(t, *mean, *sd),
                f64::NEG_INFINITY,
                f64::INFINITY,
                *mean,
                *sd,
            ),
            PriorSpec::GridWeight { points, weights } => Ok(points
                .iter()
                .zip(weights)
                .filter(|(_, w)| **w > 0.0)
                .map(|(p, w)| w * g(*p))
                .sum()),
            other => Err(Error::domain(format!(
                "{other} must be resolved against a model before integration"
            ))),
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::PointMass { theta } => write!(f, "point:{theta}"),
            PriorSpec::UniformInterval { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
            PriorSpec::NormalPrior { mean, sd } => write!(f, "normal:{mean}:{sd}"),
            PriorSpec::GridWeight { points, weights } => {
                f.write_str("grid:")?;
                for (i, (p, w)) in points.iter().zip(weights).enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}={w}")?;
                }
                Ok(())
            }
            PriorSpec::Intrinsic => f.write_str("intrinsic"),
            PriorSpec::EmpiricalBayesAll => f.write_str("eb-all"),
            PriorSpec::EmpiricalBayesNonincreasing => f.write_str("eb-noninc"),
        }
    }
}

/// Parses `point:θ`, `uniform:lo:hi`, `normal:μ:σ`, `grid:θ1=w1,θ2=w2,...`,
/// `intrinsic`, `eb-all` and `eb-noninc`. File-backed grids
/// (`grid:@file.csv`) are resolved by the CLI.
impl FromStr for PriorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::domain(format!("bad number `{t}` in prior `{s}`")))
        };
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (s, None),
        };
        let prior = match (kind, rest) {
            ("point", Some(r)) => PriorSpec::point(num(r)?),
            ("uniform", Some(r)) => {
                let (a, b) = split_pair(r, s)?;
                PriorSpec::uniform(num(a)?, num(b)?)
            }
            ("normal", Some(r)) => {
                let (a, b) = split_pair(r, s)?;
                PriorSpec::normal(num(a)?, num(b)?)
            }
            ("grid", Some(r)) if !r.starts_with('@') => {
                let mut points = Vec::new();
                let mut weights = Vec::new();
                for item in r.split(',') {
                    let (p, w) = item
                        .split_once('=')
                        .ok_or_else(|| Error::domain(format!("grid entries are `point=weight`, got `{item}`")))?;
                    points.push(num(p)?);
                    weights.push(num(w)?);
                }
                PriorSpec::grid(points, weights)
            }
            ("intrinsic", None) => PriorSpec::Intrinsic,
            ("eb-all", None) => PriorSpec::EmpiricalBayesAll,
            ("eb-noninc", None) => PriorSpec::EmpiricalBayesNonincreasing,
            _ => return Err(Error::domain(format!("unrecognized prior `{s}`"))),
        };
        prior.validate_shape()?;
        Ok(prior)
    }
}

/// Splits `a:b` where either part may carry a leading minus sign.
fn split_pair<'a>(r: &'a str, whole: &str) -> Result<(&'a str, &'a str)> {
    r.split_once(':')
        .ok_or_else(|| Error::domain(format!("expected two parameters in prior `{whole}`")))
}
