//! Pre-experimental design: average power, the rejection ratio
//! `R_pre = (1 − β̄)/α`, pre-experimental odds `O_pre = O_P · R_pre`, and
//! solvers for the significance threshold and the sample size.

mod model;

pub use model::{r_to_d, Family, Sides, TestModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{intrinsic_prior, PriorSpec, PriorUse};
use crate::freqcheck::RejectionRegion;
use crate::mathcore::Quadrature;

/// Points in the per-θ power table for non-degenerate effect specs.
const POWER_TABLE_POINTS: usize = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub alpha: f64,
    /// Average power 1 − β̄.
    pub avg_power: f64,
    /// Critical value c of the region (z ≥ c, |z| ≥ c or |x| ≥ c).
    pub rejection_boundary: f64,
    /// (θ, 1 − β(θ)); empty for a point-mass effect.
    pub per_theta_power: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub alpha: f64,
    pub avg_power: f64,
    pub r_pre: f64,
    pub prior_odds: Option<f64>,
    pub o_pre: Option<f64>,
}

impl RejectionReport {
    /// Report for a power value obtained elsewhere.
    pub fn from_power(alpha: f64, avg_power: f64, prior_odds: Option<f64>) -> Result<Self> {
        let r_pre = rejection_ratio(avg_power, alpha)?;
        let o_pre = prior_odds.map(|o| pre_odds(o, r_pre)).transpose()?;
        Ok(RejectionReport {
            alpha,
            avg_power,
            r_pre,
            prior_odds,
            o_pre,
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must be positive and finite, got {v}")))
    }
}

/// Resolves the effect spec into a concrete prior usable for integration.
fn design_effect(model: &TestModel, effect: &PriorSpec) -> Result<PriorSpec> {
    effect.validate_for(model, PriorUse::Design)?;
    match effect {
        PriorSpec::Intrinsic => intrinsic_prior(model),
        other => Ok(other.clone()),
    }
}

/// Average of 1 − β(θ) over the effect spec for a fixed region.
pub fn average_power(
    model: &TestModel,
    effect: &PriorSpec,
    region: &RejectionRegion,
    cfg: &Quadrature,
) -> Result<f64> {
    let effect = design_effect(model, effect)?;
    let p = effect.expectation(|theta| region.probability(model, theta), cfg)?;
    Ok(p.clamp(0.0, 1.0))
}

pub fn compute_power(model: &TestModel, effect: &PriorSpec, alpha: f64) -> Result<PowerResult> {
    compute_power_with(model, effect, alpha, &Quadrature::default())
}

pub fn compute_power_with(
    model: &TestModel,
    effect: &PriorSpec,
    alpha: f64,
    cfg: &Quadrature,
) -> Result<PowerResult> {
    check_alpha(alpha)?;
    model.validate()?;
    let region = RejectionRegion::for_model(model, alpha)?;
    let resolved = design_effect(model, effect)?;
    let avg_power = average_power(model, &resolved, &region, cfg)?;

    let grid: Vec<f64> = match &resolved {
        PriorSpec::PointMass { .. } => Vec::new(),
        PriorSpec::GridWeight { points, .. } => points.clone(),
        PriorSpec::UniformInterval { lo, hi } => linspace(*lo, *hi, POWER_TABLE_POINTS),
        PriorSpec::NormalPrior { mean, sd } => {
            let (mut lo, hi) = (mean - 3.0 * sd, mean + 3.0 * sd);
            if model.family == Family::NormalVariance {
                lo = lo.max(f64::MIN_POSITIVE);
            }
            linspace(lo, hi, POWER_TABLE_POINTS)
        }
        _ => Vec::new(),
    };
    let per_theta_power = grid
        .into_iter()
        .map(|t| (t, region.probability(model, t)))
        .collect();

    Ok(PowerResult {
        alpha,
        avg_power,
        rejection_boundary: region.boundary(),
        per_theta_power,
    })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

/// `power / alpha`.
pub fn rejection_ratio(power: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&power) {
        return Err(Error::domain(format!("power must lie in [0, 1], got {power}")));
    }
    Ok(power / alpha)
}

/// `prior_odds · r_pre`.
pub fn pre_odds(prior_odds: f64, r_pre: f64) -> Result<f64> {
    check_positive(prior_odds, "prior odds")?;
    check_positive(r_pre, "rejection ratio")?;
    Ok(prior_odds * r_pre)
}

/// Significance threshold giving the target pre-experimental odds:
/// `α = O_P · (1 − β̄) / O_pre`.
pub fn solve_alpha(prior_odds: f64, avg_power: f64, target_o_pre: f64) -> Result<f64> {
    check_positive(prior_odds, "prior odds")?;
    check_positive(avg_power, "average power")?;
    check_positive(target_o_pre, "target odds")?;
    if avg_power > 1.0 {
        return Err(Error::domain(format!("power must not exceed 1, got {avg_power}")));
    }
    let alpha = prior_odds * avg_power / target_o_pre;
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(Error::InfeasibleTarget(format!(
            "target odds {target_o_pre} need alpha = {alpha}, outside (0, 1)"
        )))
    }
}

/// Largest per-group sample size tried before giving up.
const MAX_SAMPLE_SIZE: u64 = 1 << 40;

/// Smallest per-group n with `R_pre ≥ target_r_pre`, by doubling then
/// integer bisection.
pub fn solve_sample_size(
    model: &TestModel,
    effect: &PriorSpec,
    alpha: f64,
    target_r_pre: f64,
) -> Result<u64> {
    check_alpha(alpha)?;
    check_positive(target_r_pre, "target rejection ratio")?;
    if model.family == Family::NormalVariance {
        return Err(Error::UnsupportedModel(
            "sample-size search needs a mean family".into(),
        ));
    }
    if target_r_pre > 1.0 / alpha {
        return Err(Error::InfeasibleTarget(format!(
            "rejection ratio {target_r_pre} exceeds the cap 1/alpha = {}",
            1.0 / alpha
        )));
    }
    let effect = design_effect(model, effect)?;
    let cfg = Quadrature::default();
    let region = RejectionRegion::for_model(model, alpha)?;
    let meets = |n: u64| -> Result<bool> {
        let m = model.with_n(n);
        let p = average_power(&m, &effect, &region, &cfg)?;
        Ok(rejection_ratio(p, alpha)? >= target_r_pre)
    };

    if meets(1)? {
        return Ok(1);
    }
    let mut lo = 1;
    let mut hi = 2;
    while !meets(hi)? {
        lo = hi;
        hi *= 2;
        if hi > MAX_SAMPLE_SIZE {
            return Err(Error::InfeasibleTarget(format!(
                "no sample size up to {MAX_SAMPLE_SIZE} reaches rejection ratio {target_r_pre}"
            )));
        }
    }
    // invariant: meets(hi) && !meets(lo)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if meets(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn design_report(
    model: &TestModel,
    effect: &PriorSpec,
    alpha: f64,
    prior_odds: Option<f64>,
) -> Result<RejectionReport> {
    let power = compute_power(model, effect, alpha)?;
    RejectionReport::from_power(alpha, power.avg_power, prior_odds)
}
