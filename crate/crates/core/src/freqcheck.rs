//! Numerical checks of the frequentist expectation identities
//!
//! ```text
//! E[R_post | H₀, R]   = R_pre
//! E[1/R_post | H₁*, R] = 1 / R_pre
//! ```
//!
//! where H₁* is the marginal (prior-mixture) alternative. Each side is
//! computed along its own code path: the targets come from design-module
//! average power, the left-hand sides from quadrature of the marginal
//! density over the region or from rejection-sampled Monte Carlo.

use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::{average_power, Family, Sides, TestModel};
use crate::error::{Error, Result};
use crate::evidence::{bayes_factor_with, marginal_density, PriorSpec, PriorUse};
use crate::format::sig6;
use crate::mathcore::{normal, Quadrature, RngContract};

/// Caveat attached to the second identity.
pub const IDENTITY2_CAVEAT: &str =
    "not strictly frequentist: the expectation is under the marginal density of the alternative";

/// Minimum Monte Carlo run count.
pub const MIN_MC_RUNS: u64 = 10_000;

/// Curve span beyond the critical value, in null standard deviations.
const CURVE_SPAN: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RejectionRegion {
    /// `x ≥ c`.
    Upper { c: f64 },
    /// `|x| ≥ c`.
    Symmetric { c: f64 },
    /// The whole sample space (α = 1).
    Everything,
}

impl RejectionRegion {
    /// Size-α region of the model's test.
    pub fn for_model(model: &TestModel, alpha: f64) -> Result<Self> {
        model.validate()?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if alpha == 1.0 {
            return Ok(RejectionRegion::Everything);
        }
        Ok(match (model.family, model.sides) {
            (Family::NormalVariance, _) => RejectionRegion::Symmetric {
                c: -model.null_sd() * normal::quantile(0.5 * alpha),
            },
            (_, Sides::OneSidedUpper) => RejectionRegion::Upper {
                c: -normal::quantile(alpha),
            },
            (_, Sides::TwoSided) => RejectionRegion::Symmetric {
                c: -normal::quantile(0.5 * alpha),
            },
        })
    }

    pub fn validate_for(&self, model: &TestModel) -> Result<()> {
        model.validate()?;
        match *self {
            RejectionRegion::Upper { c } if !c.is_finite() => {
                Err(Error::domain("region boundary must be finite"))
            }
            RejectionRegion::Upper { .. } if model.family == Family::NormalVariance => Err(
                Error::domain("variance-family regions must be symmetric (|x| >= c)"),
            ),
            RejectionRegion::Symmetric { c } if !(c >= 0.0 && c.is_finite()) => {
                Err(Error::domain("symmetric region boundary must be finite and >= 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            RejectionRegion::Upper { c } => x >= c,
            RejectionRegion::Symmetric { c } => x.abs() >= c,
            RejectionRegion::Everything => true,
        }
    }

    /// Critical value; −∞ for the whole space.
    pub fn boundary(&self) -> f64 {
        match *self {
            RejectionRegion::Upper { c } | RejectionRegion::Symmetric { c } => c,
            RejectionRegion::Everything => f64::NEG_INFINITY,
        }
    }

    /// Pr(x ∈ R | θ), i.e. the power at θ.
    pub fn probability(&self, model: &TestModel, theta: f64) -> f64 {
        match (*self, model.family) {
            (RejectionRegion::Everything, _) => 1.0,
            (RejectionRegion::Symmetric { c }, Family::NormalVariance) => {
                2.0 * normal::sf(c / theta.sqrt())
            }
            (RejectionRegion::Upper { c }, _) => normal::sf(c - model.noncentrality(theta)),
            (RejectionRegion::Symmetric { c }, _) => {
                let d = model.noncentrality(theta);
                normal::sf(c - d) + normal::cdf(-c - d)
            }
        }
    }

    /// Size of the region, Pr(x ∈ R | θ₀).
    pub fn null_probability(&self, model: &TestModel) -> f64 {
        self.probability(model, model.null_value)
    }

    /// ∫_R g(x) dx, truncating infinite ends at `center ± tail_cut·scale`.
    fn integrate<G: Fn(f64) -> f64>(
        &self,
        g: G,
        center: f64,
        scale: f64,
        cfg: &Quadrature,
    ) -> Result<f64> {
        let (ninf, inf) = (f64::NEG_INFINITY, f64::INFINITY);
        match *self {
            RejectionRegion::Upper { c } => cfg.integrate_around(&g, c, inf, center, scale),
            RejectionRegion::Symmetric { c } => {
                let lower = cfg.integrate_around(&g, ninf, -c, center, scale)?;
                let upper = cfg.integrate_around(&g, c, inf, center, scale)?;
                Ok(lower + upper)
            }
            RejectionRegion::Everything => cfg.integrate_around(&g, ninf, inf, center, scale),
        }
    }
}

/// Location and spread of the marginal density on the statistic scale,
/// used to place the quadrature window.
fn marginal_window(model: &TestModel, prior: &PriorSpec) -> (f64, f64) {
    if model.family == Family::NormalVariance {
        let top = match prior {
            PriorSpec::PointMass { theta } => *theta,
            PriorSpec::UniformInterval { hi, .. } => *hi,
            PriorSpec::GridWeight { points, .. } => points.iter().cloned().fold(0.0, f64::max),
            _ => model.null_value,
        };
        return (0.0, top.max(model.null_value).sqrt());
    }
    if let PriorSpec::NormalPrior { mean, sd } = prior {
        let s = model.effect_scale() * sd;
        return (model.noncentrality(*mean), (1.0 + s * s).sqrt());
    }
    let (lo, hi) = match prior {
        PriorSpec::PointMass { theta } => (*theta, *theta),
        PriorSpec::UniformInterval { lo, hi } => (*lo, *hi),
        PriorSpec::GridWeight { points, .. } => (
            points.iter().cloned().fold(f64::INFINITY, f64::min),
            points.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ),
        _ => (model.null_value, model.null_value),
    };
    let (a, b) = (model.noncentrality(lo), model.noncentrality(hi));
    (0.5 * (a + b), 1.0 + 0.5 * (b - a).abs())
}

fn resolve_prior(model: &TestModel, prior: &PriorSpec) -> Result<PriorSpec> {
    prior.validate_for(model, PriorUse::Design)?;
    match prior {
        PriorSpec::Intrinsic => crate::evidence::intrinsic_prior(model),
        p => Ok(p.clone()),
    }
}

fn positive_size(model: &TestModel, region: &RejectionRegion) -> Result<f64> {
    region.validate_for(model)?;
    let alpha = region.null_probability(model);
    if alpha > 0.0 {
        Ok(alpha)
    } else {
        Err(Error::domain("region has zero probability under the null"))
    }
}

/// Outer integrals over x wrap inner prior integrals; the looser outer
/// tolerance keeps inner jitter from stalling refinement.
fn outer_cfg(cfg: &Quadrature) -> Quadrature {
    cfg.loosened(100.0)
}

/// Pre-experimental rejection ratio `(1 − β̄)/α` of the region, computed
/// from average power.
pub fn r_pre_target(
    model: &TestModel,
    prior: &PriorSpec,
    region: &RejectionRegion,
    cfg: &Quadrature,
) -> Result<f64> {
    let alpha = positive_size(model, region)?;
    let prior = resolve_prior(model, prior)?;
    Ok(average_power(model, &prior, region, cfg)? / alpha)
}

/// `(1/α) ∫_R m(x) dx`.
pub fn expected_bf_under_null(
    model: &TestModel,
    prior: &PriorSpec,
    region: &RejectionRegion,
    cfg: &Quadrature,
) -> Result<f64> {
    let alpha = positive_size(model, region)?;
    let prior = resolve_prior(model, prior)?;
    let (center, scale) = marginal_window(model, &prior);
    let mass = marginal_mass(model, &prior, region, center, scale, cfg)?;
    Ok(mass / alpha)
}

fn marginal_mass(
    model: &TestModel,
    prior: &PriorSpec,
    region: &RejectionRegion,
    center: f64,
    scale: f64,
    cfg: &Quadrature,
) -> Result<f64> {
    with_inner_errors(|failure| {
        region.integrate(
            |x| capture(failure, marginal_density(model, x, prior, cfg)),
            center,
            scale,
            &outer_cfg(cfg),
        )
    })
}

/// `∫_R (m/R_post)(x) dx / ∫_R m(x) dx`, the mean of `1/R_post` under the
/// marginal alternative restricted to the region.
pub fn expected_inv_bf_under_marginal(
    model: &TestModel,
    prior: &PriorSpec,
    region: &RejectionRegion,
    cfg: &Quadrature,
) -> Result<f64> {
    positive_size(model, region)?;
    let prior = resolve_prior(model, prior)?;
    let (center, scale) = marginal_window(model, &prior);
    let mass = marginal_mass(model, &prior, region, center, scale, cfg)?;
    if !(mass > 0.0) {
        return Err(Error::domain("region has zero probability under the alternative"));
    }
    let weighted = with_inner_errors(|failure| {
        region.integrate(
            |x| {
                let m = capture(failure, marginal_density(model, x, &prior, cfg));
                let bf = capture(failure, bayes_factor_with(model, x, &prior, cfg));
                if m == 0.0 { 0.0 } else { m / bf }
            },
            center,
            scale,
            &outer_cfg(cfg),
        )
    })?;
    Ok(weighted / mass)
}

/// `(1/α) ∫_R R_post(x) f(x | θ₀) dx`: the null-weighted average of the
/// Bayes factor curve over the region.
pub fn null_weighted_bf_average(
    model: &TestModel,
    prior: &PriorSpec,
    region: &RejectionRegion,
    cfg: &Quadrature,
) -> Result<f64> {
    let alpha = positive_size(model, region)?;
    let prior = resolve_prior(model, prior)?;
    let integral = with_inner_errors(|failure| {
        region.integrate(
            |x| {
                let f0 = model.null_density(x);
                if f0 == 0.0 {
                    return 0.0;
                }
                f0 * capture(failure, bayes_factor_with(model, x, &prior, cfg))
            },
            0.0,
            model.null_sd(),
            &outer_cfg(cfg),
        )
    })?;
    Ok(integral / alpha)
}

type Failure = std::cell::RefCell<Option<Error>>;

/// Records the first inner failure and feeds NaN to the outer quadrature,
/// which then aborts; the recorded error replaces its generic one.
fn capture(failure: &Failure, r: Result<f64>) -> f64 {
    match r {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    }
}

fn with_inner_errors<F: FnOnce(&Failure) -> Result<f64>>(body: F) -> Result<f64> {
    let failure = Failure::new(None);
    let r = body(&failure);
    match failure.into_inner() {
        Some(e) => Err(e),
        None => r,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityValue {
    pub computed: f64,
    pub target: f64,
    pub rel_error: f64,
}

impl IdentityValue {
    fn new(computed: f64, target: f64) -> Self {
        IdentityValue {
            computed,
            target,
            rel_error: ((computed - target) / target).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub alpha: f64,
    pub avg_power: f64,
    pub r_pre: f64,
    /// E[R_post | H₀, R] against R_pre.
    pub identity1: IdentityValue,
    /// E[1/R_post | H₁*, R] against 1/R_pre.
    pub identity2: IdentityValue,
    /// Null-weighted Bayes factor curve average against R_pre.
    pub curve_average: IdentityValue,
    pub caveat: String,
}

/// Runs every quadrature route against the power-based target.
pub fn verify_identities(
    model: &TestModel,
    prior: &PriorSpec,
    region: &RejectionRegion,
    cfg: &Quadrature,
) -> Result<IdentityCheck> {
    let alpha = positive_size(model, region)?;
    let resolved = resolve_prior(model, prior)?;
    let avg_power = average_power(model, &resolved, region, cfg)?;
    let r_pre = avg_power / alpha;
    Ok(IdentityCheck {
        alpha,
        avg_power,
        r_pre,
        identity1: IdentityValue::new(expected_bf_under_null(model, prior, region, cfg)?, r_pre),
        identity2: IdentityValue::new(
            expected_inv_bf_under_marginal(model, prior, region, cfg)?,
            1.0 / r_pre,
        ),
        curve_average: IdentityValue::new(
            null_weighted_bf_average(model, prior, region, cfg)?,
            r_pre,
        ),
        caveat: IDENTITY2_CAVEAT.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub estimate: f64,
    pub std_error: f64,
    pub target: f64,
    pub z_score: f64,
    pub n_runs: u64,
    pub seed: RngContract,
}

impl MCReport {
    pub fn new(estimate: f64, std_error: f64, target: f64, n_runs: u64, seed: RngContract) -> Self {
        MCReport {
            estimate,
            std_error,
            target,
            z_score: (estimate - target) / std_error,
            n_runs,
            seed,
        }
    }

    pub fn within(&self, n_se: f64) -> bool {
        self.z_score.abs() <= n_se
    }
}

/// Streaming mean and sum of squared deviations, mergeable across chunks.
#[derive(Debug, Clone, Default)]
pub(crate) struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64,
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Draws the statistic under H₀, keeps draws in the region, and averages
/// their Bayes factors. The target is R_pre from average power.
pub fn mc_check_identity(
    model: &TestModel,
    prior: &PriorSpec,
    region: &RejectionRegion,
    n_runs: u64,
    seed: RngContract,
) -> Result<MCReport> {
    mc_check_identity_with(model, prior, region, n_runs, seed, &Quadrature::default())
}

pub fn mc_check_identity_with(
    model: &TestModel,
    prior: &PriorSpec,
    region: &RejectionRegion,
    n_runs: u64,
    seed: RngContract,
    cfg: &Quadrature,
) -> Result<MCReport> {
    if n_runs < MIN_MC_RUNS {
        return Err(Error::domain(format!(
            "Monte Carlo checks need at least {MIN_MC_RUNS} runs, got {n_runs}"
        )));
    }
    let target = r_pre_target(model, prior, region, cfg)?;
    let resolved = resolve_prior(model, prior)?;
    let null_sd = model.null_sd();

    type Acc = (Moments, Option<Error>);
    let (moments, failure) = seed.fold_runs(
        n_runs,
        || (Moments::default(), None),
        |acc: &mut Acc, _run, rng| {
            let z: f64 = StandardNormal.sample(rng);
            let x = null_sd * z;
            if !region.contains(x) || acc.1.is_some() {
                return;
            }
            match bayes_factor_with(model, x, &resolved, cfg) {
                Ok(bf) => acc.0.push(bf),
                Err(e) => acc.1 = Some(e),
            }
        },
        |a: Acc, b: Acc| (a.0.merge(b.0), a.1.or(b.1)),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if moments.n < 2 {
        return Err(Error::InsufficientSample(format!(
            "{} of {n_runs} null draws fell in the rejection region",
            moments.n
        )));
    }
    Ok(MCReport::new(moments.mean, moments.std_error(), target, n_runs, seed))
}

/// Bayes factor at `grid_size` points across the region (per branch for
/// symmetric regions), in increasing statistic order.
pub fn bf_curve_over_region(
    model: &TestModel,
    prior: &PriorSpec,
    region: &RejectionRegion,
    grid_size: usize,
) -> Result<Vec<(f64, f64)>> {
    if grid_size < 2 {
        return Err(Error::domain("curve grid needs at least 2 points"));
    }
    region.validate_for(model)?;
    prior.validate_for(model, PriorUse::Evidence)?;
    let span = CURVE_SPAN * model.null_sd();
    let xs: Vec<f64> = match *region {
        RejectionRegion::Upper { c } => grid(c, c + span, grid_size),
        RejectionRegion::Symmetric { c } => {
            let mut lower = grid(-c - span, -c, grid_size);
            lower.extend(grid(c, c + span, grid_size));
            lower
        }
        RejectionRegion::Everything => grid(-span, span, grid_size),
    };
    let cfg = Quadrature::default();
    xs.into_iter()
        .map(|x| Ok((x, bayes_factor_with(model, x, prior, &cfg)?)))
        .collect()
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

/// CSV with header `statistic,r_post`, six significant digits.
pub fn curve_to_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("statistic,r_post\n");
    for (x, r) in curve {
        let _ = writeln!(out, "{},{}", sig6(*x), sig6(*r));
    }
    out
}
