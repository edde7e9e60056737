use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// One-sample mean with known standard deviation.
    ZMean,
    /// Difference of two group means with a common known standard deviation.
    TwoSampleZ,
    /// Variance of a single zero-mean normal observation.
    NormalVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sides {
    OneSidedUpper,
    TwoSided,
}

impl Family {
    pub fn is_mean(self) -> bool {
        !matches!(self, Family::NormalVariance)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::ZMean => "z-mean",
            Family::TwoSampleZ => "two-sample-z",
            Family::NormalVariance => "normal-variance",
        })
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "z-mean" | "z" => Ok(Family::ZMean),
            "two-sample-z" | "two-sample" => Ok(Family::TwoSampleZ),
            "normal-variance" | "variance" => Ok(Family::NormalVariance),
            _ => Err(Error::domain(format!("unknown family `{s}`"))),
        }
    }
}

impl fmt::Display for Sides {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sides::OneSidedUpper => "one",
            Sides::TwoSided => "two",
        })
    }
}

impl FromStr for Sides {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "one-sided" | "one-sided-upper" | "upper" => Ok(Sides::OneSidedUpper),
            "two" | "two-sided" => Ok(Sides::TwoSided),
            _ => Err(Error::domain(format!("unknown sidedness `{s}`"))),
        }
    }
}

/// Sampling family and point null under test.
///
/// Mean families are reduced to the z statistic
/// `Z = k·(estimate − θ₀)/σ ~ N(k·(θ − θ₀)/σ, 1)` with `k = sqrt(n1)` for
/// one sample and `k = sqrt(n1·n2/(n1+n2))` for two. Parameters θ (and all
/// priors) live on the effect scale in units of `known_sd`; with the
/// defaults `n1 = 1`, `σ = 1`, `θ₀ = 0` the effect scale is the
/// noncentrality scale of Z itself.
///
/// The variance family observes a single `X ~ N(0, θ)` and tests
/// `θ = null_value`; its statistic is `x` and its rejection regions are
/// `|x| ≥ c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestModel {
    pub family: Family,
    pub sides: Sides,
    pub null_value: f64,
    pub known_sd: f64,
    pub n1: u64,
    pub n2: u64,
}

impl TestModel {
    pub fn z_mean(sides: Sides) -> Self {
        TestModel {
            family: Family::ZMean,
            sides,
            null_value: 0.0,
            known_sd: 1.0,
            n1: 1,
            n2: 1,
        }
    }

    pub fn two_sample_z(sides: Sides, n1: u64, n2: u64) -> Self {
        TestModel {
            family: Family::TwoSampleZ,
            sides,
            null_value: 0.0,
            known_sd: 1.0,
            n1,
            n2,
        }
    }

    pub fn normal_variance(null_variance: f64) -> Self {
        TestModel {
            family: Family::NormalVariance,
            sides: Sides::TwoSided,
            null_value: null_variance,
            known_sd: 1.0,
            n1: 1,
            n2: 1,
        }
    }

    pub fn with_null(mut self, null_value: f64) -> Self {
        self.null_value = null_value;
        self
    }

    pub fn with_sd(mut self, sd: f64) -> Self {
        self.known_sd = sd;
        self
    }

    /// Same design with `n` per group (both groups for two-sample models).
    pub fn with_n(mut self, n: u64) -> Self {
        self.n1 = n;
        if self.family == Family::TwoSampleZ {
            self.n2 = n;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.known_sd > 0.0 && self.known_sd.is_finite()) {
            return Err(Error::domain("known_sd must be positive and finite"));
        }
        if !self.null_value.is_finite() {
            return Err(Error::domain("null value must be finite"));
        }
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::domain("sample sizes must be at least 1"));
        }
        if self.family == Family::NormalVariance {
            if !(self.null_value > 0.0) {
                return Err(Error::domain("variance null value must be positive"));
            }
            if self.sides != Sides::TwoSided {
                return Err(Error::domain(
                    "the variance family uses |x| >= c regions; sides must be two-sided",
                ));
            }
            if self.n1 != 1 {
                return Err(Error::UnsupportedModel(
                    "the variance family observes a single observation (n1 = 1)".into(),
                ));
            }
        }
        Ok(())
    }

    /// Factor `k/σ` mapping an effect θ − θ₀ to the mean of Z.
    pub fn effect_scale(&self) -> f64 {
        let n_eff = match self.family {
            Family::TwoSampleZ => {
                let (a, b) = (self.n1 as f64, self.n2 as f64);
                a * b / (a + b)
            }
            _ => self.n1 as f64,
        };
        n_eff.sqrt() / self.known_sd
    }

    /// Mean of Z under θ (mean families only).
    pub fn noncentrality(&self, theta: f64) -> f64 {
        self.effect_scale() * (theta - self.null_value)
    }

    /// Standard deviation of the statistic under the null.
    pub fn null_sd(&self) -> f64 {
        match self.family {
            Family::NormalVariance => self.null_value.sqrt(),
            _ => 1.0,
        }
    }

    /// Whether θ is an admissible parameter value of the family.
    pub fn is_legal_parameter(&self, theta: f64) -> bool {
        theta.is_finite() && (self.family.is_mean() || theta > 0.0)
    }

    /// Density of the statistic at `x` under parameter θ.
    pub fn density(&self, x: f64, theta: f64) -> f64 {
        match self.family {
            Family::NormalVariance => normal::density(x, 0.0, theta.sqrt()),
            _ => normal::pdf(x - self.noncentrality(theta)),
        }
    }

    pub fn null_density(&self, x: f64) -> f64 {
        self.density(x, self.null_value)
    }

    /// f(x | θ) / f(x | θ₀), evaluated without forming either density.
    pub fn likelihood_ratio(&self, x: f64, theta: f64) -> f64 {
        self.log_likelihood_ratio(x, theta).exp()
    }

    pub fn log_likelihood_ratio(&self, x: f64, theta: f64) -> f64 {
        match self.family {
            Family::NormalVariance => {
                let v0 = self.null_value;
                0.5 * (v0 / theta).ln() + 0.5 * x * x * (1.0 / v0 - 1.0 / theta)
            }
            _ => {
                let d = self.noncentrality(theta);
                x * d - 0.5 * d * d
            }
        }
    }

    /// Unadjusted p-value of the observed statistic.
    pub fn p_value(&self, x: f64) -> f64 {
        match (self.family, self.sides) {
            (Family::NormalVariance, _) => 2.0 * normal::sf(x.abs() / self.null_sd()),
            (_, Sides::OneSidedUpper) => normal::sf(x),
            (_, Sides::TwoSided) => 2.0 * normal::sf(x.abs()),
        }
    }

    /// Statistic value whose p-value equals `p`.
    pub fn statistic_for_p(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("p-value must lie in (0, 1), got {p}")));
        }
        Ok(match (self.family, self.sides) {
            (Family::NormalVariance, _) => self.null_sd() * normal::quantile(1.0 - 0.5 * p),
            (_, Sides::OneSidedUpper) => -normal::quantile(p),
            (_, Sides::TwoSided) => -normal::quantile(0.5 * p),
        })
    }
}

/// Converts a point-biserial correlation r into Cohen's d, `2r / sqrt(1 − r²)`.
///
/// Never applied implicitly: callers that want d from r convert explicitly.
pub fn r_to_d(r: f64) -> Result<f64> {
    if !(r > -1.0 && r < 1.0) {
        return Err(Error::domain(format!("correlation must lie in (-1, 1), got {r}")));
    }
    Ok(2.0 * r / (1.0 - r * r).sqrt())
}
