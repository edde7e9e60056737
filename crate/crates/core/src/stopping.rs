//! Optional-stopping simulator.
//!
//! Everything runs on the normalized sufficient-statistic scale: the
//! original sample has fraction 1, and the running sum `W(t)` after
//! fraction `t` is Brownian motion with drift `d` (the noncentrality of
//! one full sample). The cumulative z statistic is `W(t)/√t`, so the
//! absolute sample size never enters.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::{Family, Sides, TestModel};
use crate::error::{Error, Result};
use crate::evidence::{bayes_factor, intrinsic_prior, PriorSpec, PriorUse};
use crate::freqcheck::MCReport;
use crate::mathcore::{normal, Quadrature, RngContract};

/// The stop probability quoted for the worked optional-stopping example.
pub const QUOTED_FOUR_LOOK_STOP_PROB: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Start {
    /// Original sample already observed with this z; increments under H₀.
    FixedZ { z: f64 },
    /// Original sample and increments drawn under H₀.
    SimulateNull,
    /// Original sample and increments drawn with noncentrality `d` per
    /// unit fraction.
    SimulateEffect { d: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingConfig {
    pub start: Start,
    #[serde(default = "one")]
    pub initial_fraction: f64,
    /// Extra batches after the original sample, as fractions of it.
    pub batch_fractions: Vec<f64>,
    pub threshold_p: f64,
    pub sides: Sides,
    pub n_runs: u64,
    pub seed: RngContract,
    /// Trajectory end points kept in the report (the first runs by index).
    #[serde(default = "default_retain")]
    pub retain: usize,
}

fn one() -> f64 {
    1.0
}

fn default_retain() -> usize {
    1000
}

impl StoppingConfig {
    pub fn new(start: Start, batch_fractions: Vec<f64>, threshold_p: f64, sides: Sides) -> Self {
        StoppingConfig {
            start,
            initial_fraction: 1.0,
            batch_fractions,
            threshold_p,
            sides,
            n_runs: 100_000,
            seed: RngContract::new(0, 0),
            retain: default_retain(),
        }
    }

    /// `k` equal batches of size `fraction`.
    pub fn with_batches(mut self, k: usize, fraction: f64) -> Self {
        self.batch_fractions = vec![fraction; k];
        self
    }

    pub fn with_runs(mut self, n_runs: u64, seed: RngContract) -> Self {
        self.n_runs = n_runs;
        self.seed = seed;
        self
    }

    /// Starts at the z of the given p, then takes four batches of a
    /// quarter sample each, stopping at p < 0.05 under H₀.
    pub fn four_quarter_looks(sides: Sides) -> Self {
        let model = TestModel::z_mean(sides);
        let z = model.statistic_for_p(0.08).expect("0.08 is a valid p-value");
        StoppingConfig::new(Start::FixedZ { z }, vec![0.25; 4], 0.05, sides)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_p > 0.0 && self.threshold_p < 1.0) {
            return Err(Error::domain(format!(
                "threshold_p must lie in (0, 1), got {}",
                self.threshold_p
            )));
        }
        if !(self.initial_fraction > 0.0 && self.initial_fraction.is_finite()) {
            return Err(Error::domain("initial_fraction must be positive"));
        }
        if let Some(b) = self.batch_fractions.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::domain(format!("batch fractions must be positive, got {b}")));
        }
        match self.start {
            Start::FixedZ { z } if !z.is_finite() => {
                return Err(Error::domain("fixed start z must be finite"))
            }
            Start::FixedZ { .. } if self.batch_fractions.is_empty() => {
                return Err(Error::domain(
                    "a fixed start needs at least one batch to simulate",
                ))
            }
            Start::SimulateEffect { d } if !d.is_finite() => {
                return Err(Error::domain("effect drift must be finite"))
            }
            _ => {}
        }
        if self.n_runs == 0 {
            return Err(Error::domain("n_runs must be positive"));
        }
        Ok(())
    }

    /// Looks at the data: the original sample plus one per batch.
    pub fn stages(&self) -> usize {
        1 + self.batch_fractions.len()
    }

    fn p_value(&self, z: f64) -> f64 {
        match self.sides {
            Sides::OneSidedUpper => normal::sf(z),
            Sides::TwoSided => 2.0 * normal::sf(z.abs()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnd {
    pub run: u64,
    /// Cumulative z at the last look taken.
    pub z: f64,
    pub total_fraction: f64,
    /// Stage at which sampling stopped, if it did.
    pub stop_stage: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingSimReport {
    pub config: StoppingConfig,
    /// Stage 0 is the original sample; stage i ≥ 1 follows batch i.
    pub per_stage_stop_prob: Vec<f64>,
    pub per_stage_std_error: Vec<f64>,
    /// Sum of the per-stage probabilities.
    pub cumulative_stop_prob: f64,
    pub std_error: f64,
    pub trajectories_summary: Vec<TrajectoryEnd>,
}

impl StoppingSimReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

#[derive(Default)]
struct SimAcc {
    counts: Vec<u64>,
    kept: Vec<TrajectoryEnd>,
}

/// Binomial standard error, kept positive when every run lands on the
/// same side by using the half-count adjustment.
fn binomial_se(hits: u64, n: u64) -> f64 {
    let nf = n as f64;
    let mut p = hits as f64 / nf;
    if hits == 0 || hits == n {
        p = (hits as f64 + 0.5) / (nf + 1.0);
    }
    (p * (1.0 - p) / nf).sqrt()
}

/// Simulates looks at the data after each batch and stops at the first
/// p-value below the threshold.
pub fn simulate_sequential(config: &StoppingConfig) -> Result<StoppingSimReport> {
    config.validate()?;
    let stages = config.stages();
    let t0 = config.initial_fraction;
    let (drift, fixed_w) = match config.start {
        Start::FixedZ { z } => (0.0, Some(z * t0.sqrt())),
        Start::SimulateNull => (0.0, None),
        Start::SimulateEffect { d } => (d, None),
    };

    let acc = config.seed.fold_runs(
        config.n_runs,
        || SimAcc {
            counts: vec![0; stages],
            kept: Vec::new(),
        },
        |acc: &mut SimAcc, run, rng| {
            let mut w = match fixed_w {
                Some(w) => w,
                None => {
                    let e: f64 = StandardNormal.sample(rng);
                    drift * t0 + t0.sqrt() * e
                }
            };
            let mut t = t0;
            let mut stop = None;
            let mut z = w / t.sqrt();
            if config.p_value(z) < config.threshold_p {
                stop = Some(0);
            } else {
                for (i, &b) in config.batch_fractions.iter().enumerate() {
                    let e: f64 = StandardNormal.sample(rng);
                    w += drift * b + b.sqrt() * e;
                    t += b;
                    z = w / t.sqrt();
                    if config.p_value(z) < config.threshold_p {
                        stop = Some(i + 1);
                        break;
                    }
                }
            }
            if let Some(s) = stop {
                acc.counts[s] += 1;
            }
            if (run as usize) < config.retain {
                acc.kept.push(TrajectoryEnd {
                    run,
                    z,
                    total_fraction: t,
                    stop_stage: stop,
                });
            }
        },
        |mut a, b| {
            a.counts.iter_mut().zip(&b.counts).for_each(|(x, y)| *x += y);
            a.kept.extend(b.kept);
            a
        },
    );

    let n = config.n_runs;
    let per_stage_stop_prob: Vec<f64> = acc.counts.iter().map(|&c| c as f64 / n as f64).collect();
    let per_stage_std_error = acc.counts.iter().map(|&c| binomial_se(c, n)).collect();
    let cumulative_stop_prob = per_stage_stop_prob.iter().sum();
    let total: u64 = acc.counts.iter().sum();
    Ok(StoppingSimReport {
        config: config.clone(),
        per_stage_stop_prob,
        per_stage_std_error,
        cumulative_stop_prob,
        std_error: binomial_se(total, n),
        trajectories_summary: acc.kept,
    })
}

/// Type I error of the stopped design, reported against the nominal
/// threshold.
pub fn stopped_type1_error(config: &StoppingConfig) -> Result<MCReport> {
    if config.start != Start::SimulateNull {
        return Err(Error::domain(
            "type I error needs the original sample simulated under the null",
        ));
    }
    let r = simulate_sequential(config)?;
    Ok(MCReport::new(
        r.cumulative_stop_prob,
        r.std_error,
        config.threshold_p,
        config.n_runs,
        config.seed,
    ))
}

/// Bayes factor of stopped data, computed twice.
///
/// The stopped-data density is `τ_N(x) · Π f(xᵢ | θ)`, where `τ_N` is the
/// indicator that the rule stopped at the realized sample. `bf_stopped`
/// keeps `tau_factor` as an explicit multiplier of both marginals and works
/// with the Brownian log-likelihood `W·d − d²·t/2`; `bf_fixed` treats the
/// final mean as a fixed-size sample of fraction `t` and calls the
/// ordinary Bayes factor. `final_mean` is on the data scale of the model.
pub fn bf_stopped_vs_fixed(
    final_mean: f64,
    total_n_fraction: f64,
    prior: &PriorSpec,
    model: &TestModel,
) -> Result<(f64, f64)> {
    bf_stopped_vs_fixed_with_tau(final_mean, total_n_fraction, prior, model, 1.0)
}

pub fn bf_stopped_vs_fixed_with_tau(
    final_mean: f64,
    total_n_fraction: f64,
    prior: &PriorSpec,
    model: &TestModel,
    tau_factor: f64,
) -> Result<(f64, f64)> {
    if !(total_n_fraction > 0.0 && total_n_fraction.is_finite()) {
        return Err(Error::domain(format!(
            "stopped data must have positive length, got fraction {total_n_fraction}"
        )));
    }
    if !final_mean.is_finite() {
        return Err(Error::domain("final mean must be finite"));
    }
    if !(tau_factor > 0.0 && tau_factor.is_finite()) {
        return Err(Error::domain("the stopping factor must be positive on stopped data"));
    }
    model.validate()?;
    if model.family == Family::NormalVariance {
        return Err(Error::UnsupportedModel(
            "optional stopping is simulated for mean families".into(),
        ));
    }
    prior.validate_for(model, PriorUse::Evidence)?;
    let prior = match prior {
        PriorSpec::Intrinsic => intrinsic_prior(model)?,
        p if p.is_data_dependent() => {
            return Err(Error::domain(format!(
                "{p} depends on the data; pass an explicit prior"
            )))
        }
        p => p.clone(),
    };

    let t = total_n_fraction;
    let k = model.effect_scale();
    let w = t * k * (final_mean - model.null_value);

    // stopped formulation: τ · m(W) over τ · f(W | θ₀)
    let numerator = match prior {
        PriorSpec::NormalPrior { mean, sd } => {
            // W ~ N(m t, t + s² t²) marginally, N(0, t) under the null
            let (m, s) = (model.noncentrality(mean), k * sd);
            let var = t + s * s * t * t;
            tau_factor * normal::density(w, m * t, var.sqrt()) / normal::density(w, 0.0, t.sqrt())
        }
        PriorSpec::UniformInterval { lo, hi } => {
            // complete the square in d: the integrand is a normal kernel
            // centered at W/t with variance 1/t
            let (a, b) = (model.noncentrality(lo), model.noncentrality(hi));
            let rt = t.sqrt();
            let (u, v) = (rt * (a - w / t), rt * (b - w / t));
            let mass = if u > 0.0 {
                normal::sf(u) - normal::sf(v)
            } else {
                normal::cdf(v) - normal::cdf(u)
            };
            let log_m = 0.5 * w * w / t + 0.5 * (2.0 * std::f64::consts::PI / t).ln() + mass.ln()
                - (b - a).ln();
            tau_factor * log_m.exp()
        }
        ref p => {
            let lr = |theta: f64| {
                let d = model.noncentrality(theta);
                (w * d - 0.5 * d * d * t).exp()
            };
            tau_factor * p.expectation(lr, &Quadrature::default())?
        }
    };
    let denominator = tau_factor;
    let bf_stopped = numerator / denominator;

    let fixed_model = model.with_sd(model.known_sd / t.sqrt());
    let z = fixed_model.noncentrality(final_mean);
    let bf_fixed = bayes_factor(&fixed_model, z, &prior)?;
    Ok((bf_stopped, bf_fixed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourLookRow {
    pub sides: Sides,
    pub start_z: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub claimed: f64,
}

/// Simulated stop probability of the worked example under both
/// sidedness readings, next to the quoted 2/3. No tolerance is applied.
pub fn four_look_comparison(n_runs: u64, seed: RngContract) -> Result<Vec<FourLookRow>> {
    [Sides::TwoSided, Sides::OneSidedUpper]
        .into_iter()
        .map(|sides| {
            let cfg = StoppingConfig::four_quarter_looks(sides).with_runs(n_runs, seed);
            let r = simulate_sequential(&cfg)?;
            let start_z = match cfg.start {
                Start::FixedZ { z } => z,
                _ => unreachable!("the example starts from a fixed z"),
            };
            Ok(FourLookRow {
                sides,
                start_z,
                estimate: r.cumulative_stop_prob,
                std_error: r.std_error,
                claimed: QUOTED_FOUR_LOOK_STOP_PROB,
            })
        })
        .collect()
}
