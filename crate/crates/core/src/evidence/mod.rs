//! Post-experimental evidence: the p-value-only Bayes factor bound,
//! Bayes factors under explicit priors, empirical-Bayes maxima, the
//! intrinsic prior, and post-experimental odds.

mod prior;

pub use prior::{PriorSpec, PriorUse};

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::design::{Family, Sides, TestModel};
use crate::error::{Error, Result};
use crate::format::sig6;
use crate::mathcore::optimize::{maximize_scanned, DEFAULT_TOL, SCAN_POINTS};
use crate::mathcore::{normal, Quadrature};

/// Upper bound `1/(−e·p·ln p)` on the Bayes factor of a proper p-value.
///
/// `None` when `p > 1/e`, where the bound does not apply; it is not
/// clamped to 1 there.
pub fn bf_bound(p: f64) -> Result<Option<f64>> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p-value must lie in (0, 1), got {p}")));
    }
    if p > 1.0 / E {
        return Ok(None);
    }
    // ≥ 1 on (0, 1/e]; the max only absorbs rounding at p = 1/e
    Ok(Some((1.0 / (-E * p * p.ln())).max(1.0)))
}

fn check_statistic(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("statistic must be finite, got {x}")))
    }
}

/// Bayes factor `m(x) / f(x | θ₀)` of H₁ (under `prior`) to H₀.
pub fn bayes_factor(model: &TestModel, statistic: f64, prior: &PriorSpec) -> Result<f64> {
    bayes_factor_with(model, statistic, prior, &Quadrature::default())
}

pub fn bayes_factor_with(
    model: &TestModel,
    statistic: f64,
    prior: &PriorSpec,
    cfg: &Quadrature,
) -> Result<f64> {
    check_statistic(statistic)?;
    prior.validate_for(model, PriorUse::Evidence)?;
    match prior {
        PriorSpec::PointMass { theta } => Ok(model.likelihood_ratio(statistic, *theta)),
        PriorSpec::NormalPrior { mean, sd } => Ok(normal_prior_bf(model, statistic, *mean, *sd)),
        PriorSpec::UniformInterval { lo, hi } if model.family.is_mean() => {
            Ok(uniform_prior_bf(model, statistic, *lo, *hi))
        }
        PriorSpec::UniformInterval { .. } | PriorSpec::GridWeight { .. } => {
            prior.expectation(|t| model.likelihood_ratio(statistic, t), cfg)
        }
        PriorSpec::Intrinsic => bayes_factor_with(model, statistic, &intrinsic_prior(model)?, cfg),
        PriorSpec::EmpiricalBayesAll => Ok(empirical_bayes_all(model, statistic)?.r_post),
        PriorSpec::EmpiricalBayesNonincreasing => {
            Ok(empirical_bayes_nonincreasing_with(model, statistic, cfg)?.r_post)
        }
    }
}

/// Closed form for a normal prior on a mean family: with the prior mapped
/// to N(m, s²) on the noncentrality scale,
/// `BF = (1+s²)^(−1/2) · exp(z²/2 − (z−m)²/(2(1+s²)))`.
fn normal_prior_bf(model: &TestModel, z: f64, mean: f64, sd: f64) -> f64 {
    let m = model.noncentrality(mean);
    let s2 = (model.effect_scale() * sd).powi(2);
    let v = 1.0 + s2;
    v.sqrt().recip() * (0.5 * z * z - 0.5 * (z - m) * (z - m) / v).exp()
}

/// Closed form for a uniform prior on a mean family. With the interval
/// mapped to `[a, b]` on the noncentrality scale,
/// `BF = √(2π) · exp(z²/2) · [Φ(b − z) − Φ(a − z)] / (b − a)`,
/// evaluated in logs with the tail difference taken on the side that
/// avoids cancellation.
fn uniform_prior_bf(model: &TestModel, z: f64, lo: f64, hi: f64) -> f64 {
    let (a, b) = (model.noncentrality(lo) - z, model.noncentrality(hi) - z);
    let mass = if a > 0.0 {
        normal::sf(a) - normal::sf(b)
    } else {
        normal::cdf(b) - normal::cdf(a)
    };
    let width = model.noncentrality(hi) - model.noncentrality(lo);
    (0.5 * (2.0 * std::f64::consts::PI).ln() + 0.5 * z * z + mass.ln() - width.ln()).exp()
}

/// Bayes factor by direct quadrature of the likelihood ratio against the
/// prior, bypassing closed forms. Used to cross-check them.
pub fn bayes_factor_quadrature(
    model: &TestModel,
    statistic: f64,
    prior: &PriorSpec,
    cfg: &Quadrature,
) -> Result<f64> {
    check_statistic(statistic)?;
    prior.validate_for(model, PriorUse::Evidence)?;
    let resolved = match prior {
        PriorSpec::Intrinsic => intrinsic_prior(model)?,
        p => p.clone(),
    };
    if let PriorSpec::NormalPrior { mean, sd } = resolved {
        // center the truncation window on the posterior mode
        let k = model.effect_scale();
        let (m, s) = (model.noncentrality(mean), k * sd);
        let post_mean = (m + statistic * s * s) / (1.0 + s * s);
        let theta_mode = model.null_value + post_mean / k;
        let f = |t: f64| model.likelihood_ratio(statistic, t) * normal::density(t, mean, sd);
        let lo = theta_mode - cfg.tail_cut * sd;
        let hi = theta_mode + cfg.tail_cut * sd;
        return cfg.integrate(f, lo, hi);
    }
    resolved.expectation(|t| model.likelihood_ratio(statistic, t), cfg)
}

/// Marginal density `m(x) = ∫ f(x | θ) π(θ) dθ` under the alternative.
pub fn marginal_density(
    model: &TestModel,
    x: f64,
    prior: &PriorSpec,
    cfg: &Quadrature,
) -> Result<f64> {
    check_statistic(x)?;
    prior.validate_for(model, PriorUse::Evidence)?;
    match prior {
        PriorSpec::NormalPrior { mean, sd } if model.family.is_mean() => {
            let m = model.noncentrality(*mean);
            let s = model.effect_scale() * sd;
            Ok(normal::density(x, m, (1.0 + s * s).sqrt()))
        }
        PriorSpec::Intrinsic => marginal_density(model, x, &intrinsic_prior(model)?, cfg),
        p if p.is_data_dependent() => Err(Error::domain(format!(
            "{p} depends on the data and has no marginal density"
        ))),
        p => p.expectation(|t| model.density(x, t), cfg),
    }
}

/// Supremum of the Bayes factor over point-mass priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalBayesAll {
    pub r_post: f64,
    /// Maximizing θ when the supremum is attained inside the alternative.
    pub argmax: Option<f64>,
    /// False when the supremum is approached only at the null boundary.
    pub attained: bool,
}

pub fn empirical_bayes_all(model: &TestModel, statistic: f64) -> Result<EmpiricalBayesAll> {
    check_statistic(statistic)?;
    model.validate()?;
    let boundary = EmpiricalBayesAll {
        r_post: 1.0,
        argmax: None,
        attained: false,
    };
    match model.family {
        Family::NormalVariance => {
            let v_hat = statistic * statistic;
            if v_hat == 0.0 {
                return Err(Error::domain(
                    "the variance likelihood is unbounded at x = 0",
                ));
            }
            if v_hat == model.null_value {
                return Ok(boundary);
            }
            Ok(EmpiricalBayesAll {
                r_post: model.likelihood_ratio(statistic, v_hat),
                argmax: Some(v_hat),
                attained: true,
            })
        }
        _ => {
            let admissible = match model.sides {
                Sides::OneSidedUpper => statistic > 0.0,
                Sides::TwoSided => statistic != 0.0,
            };
            if !admissible {
                return Ok(boundary);
            }
            Ok(EmpiricalBayesAll {
                r_post: (0.5 * statistic * statistic).exp(),
                argmax: Some(model.null_value + statistic / model.effect_scale()),
                attained: true,
            })
        }
    }
}

/// Best uniform prior on `[θ₀, θ₀ + a]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonincreasingMax {
    /// Width `a` of the maximizing uniform prior on the θ scale.
    pub a_star: f64,
    pub r_post: f64,
}

/// Smallest noncentrality-scale width searched.
const MIN_WIDTH: f64 = 0.01;

pub fn empirical_bayes_nonincreasing(model: &TestModel, statistic: f64) -> Result<NonincreasingMax> {
    empirical_bayes_nonincreasing_with(model, statistic, &Quadrature::default())
}

/// Maximizes the Bayes factor over `Uniform(θ₀, θ₀ + a)`. Mixtures of such
/// uniforms are exactly the nonincreasing priors, and a mixture never beats
/// its best component, so this is the maximum over the whole class.
pub fn empirical_bayes_nonincreasing_with(
    model: &TestModel,
    statistic: f64,
    cfg: &Quadrature,
) -> Result<NonincreasingMax> {
    check_statistic(statistic)?;
    model.validate()?;
    if !(model.family.is_mean() && model.sides == Sides::OneSidedUpper) {
        return Err(Error::UnsupportedModel(
            "nonincreasing empirical Bayes needs a one-sided mean family".into(),
        ));
    }
    let k = model.effect_scale();
    let theta0 = model.null_value;
    let upper = (2.0 * statistic.abs() + 10.0).max(20.0);
    // quadrature failures inside the objective surface as NaN, which the
    // maximizer reports as a domain error; keep the original cause instead
    let failure = std::cell::RefCell::new(None);
    let objective = |a: f64| {
        let prior = PriorSpec::uniform(theta0, theta0 + a / k);
        match prior.expectation(|t| model.likelihood_ratio(statistic, t), cfg) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let result = maximize_scanned(objective, MIN_WIDTH, upper, SCAN_POINTS, DEFAULT_TOL);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let (a, r_post) = result?;
    Ok(NonincreasingMax {
        a_star: a / k,
        r_post,
    })
}

/// Intrinsic prior for the z-mean family with a flat estimation prior and
/// one imaginary observation: convolving N(x*, σ²) with N(θ₀, σ²) gives
/// N(θ₀, 2σ²).
pub fn intrinsic_prior(model: &TestModel) -> Result<PriorSpec> {
    model.validate()?;
    if model.family != Family::ZMean {
        return Err(Error::UnsupportedModel(format!(
            "intrinsic prior is implemented for the z-mean family, not {}",
            model.family
        )));
    }
    Ok(PriorSpec::normal(model.null_value, model.known_sd * std::f64::consts::SQRT_2))
}

/// `prior_odds · r_post`.
pub fn post_odds(prior_odds: f64, r_post: f64) -> Result<f64> {
    for (v, what) in [(prior_odds, "prior odds"), (r_post, "Bayes factor")] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("{what} must be positive and finite, got {v}")));
        }
    }
    Ok(prior_odds * r_post)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfEntry {
    pub prior: PriorSpec,
    pub r_post: f64,
    pub o_post: Option<f64>,
    /// Extra facts about the entry (maximizer, unattained supremum).
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceReport {
    pub p_value: f64,
    pub statistic: Option<f64>,
    pub bf_bound: Option<f64>,
    pub bound_note: String,
    pub bf_entries: Vec<BfEntry>,
    pub prior_odds: Option<f64>,
    /// Prior odds times the bound, when both are present.
    pub o_post_bound: Option<f64>,
}

/// Bundles the bound and per-prior Bayes factors.
///
/// With only a statistic the p-value is computed from the model; with
/// only a p-value the statistic is recovered from it (needed only when
/// priors are given).
pub fn evidence_report(
    model: &TestModel,
    statistic: Option<f64>,
    p: Option<f64>,
    priors: &[PriorSpec],
    prior_odds: Option<f64>,
) -> Result<EvidenceReport> {
    model.validate()?;
    let p_value = match (p, statistic) {
        (Some(p), _) => p,
        (None, Some(x)) => {
            check_statistic(x)?;
            model.p_value(x)
        }
        (None, None) => return Err(Error::domain("need a statistic or a p-value")),
    };
    let bound = bf_bound(p_value)?;
    if let Some(o) = prior_odds {
        if !(o > 0.0 && o.is_finite()) {
            return Err(Error::domain(format!("prior odds must be positive, got {o}")));
        }
    }
    let statistic = match (statistic, priors.is_empty()) {
        (Some(x), _) => Some(x),
        (None, false) => Some(model.statistic_for_p(p_value)?),
        (None, true) => None,
    };

    let mut bf_entries = Vec::with_capacity(priors.len());
    for prior in priors {
        let x = statistic.expect("statistic resolved when priors are present");
        let (r_post, note) = match prior {
            PriorSpec::EmpiricalBayesAll => {
                let eb = empirical_bayes_all(model, x)?;
                let note = match eb.argmax {
                    Some(t) => format!("point mass at the MLE {}", sig6(t)),
                    None => "supremum, not attained".to_string(),
                };
                (eb.r_post, Some(note))
            }
            PriorSpec::EmpiricalBayesNonincreasing => {
                let eb = empirical_bayes_nonincreasing(model, x)?;
                let upper = model.null_value + eb.a_star;
                (eb.r_post, Some(format!("maximized at uniform:{}:{}", model.null_value, sig6(upper))))
            }
            PriorSpec::Intrinsic => (
                bayes_factor(model, x, prior)?,
                Some(format!("resolved to {}", intrinsic_prior(model)?)),
            ),
            _ => (bayes_factor(model, x, prior)?, None),
        };
        let o_post = prior_odds.map(|o| post_odds(o, r_post)).transpose()?;
        bf_entries.push(BfEntry {
            prior: prior.clone(),
            r_post,
            o_post,
            note,
        });
    }

    Ok(EvidenceReport {
        p_value,
        statistic,
        bf_bound: bound,
        bound_note: match bound {
            Some(_) => "upper bound only".to_string(),
            None => "bound not applicable: p > 1/e".to_string(),
        },
        bf_entries,
        prior_odds,
        o_post_bound: match (prior_odds, bound) {
            (Some(o), Some(b)) => Some(o * b),
            _ => None,
        },
    })
}
