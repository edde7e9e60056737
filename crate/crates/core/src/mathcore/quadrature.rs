//! Adaptive Simpson quadrature with width-proportional error budgeting.
//!
//! The interval is first cut into `INITIAL_PANELS` panels; each panel is
//! then bisected until its Richardson error estimate fits its share of the
//! tolerance. Panels that hit `max_depth` are accepted and their error is
//! carried into the reported bound, so a handful of stubborn points (kinks,
//! nested-quadrature jitter) does not abort the whole integral.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INITIAL_PANELS: usize = 16;
/// Local acceptance uses this fraction of the global tolerance.
const SAFETY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Infinite endpoints are replaced by `center ± tail_cut · scale`.
    pub tail_cut: f64,
    pub max_depth: u32,
    pub max_evals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            tail_cut: 12.0,
            max_depth: 48,
            max_evals: 4_000_000,
        }
    }
}

/// Integral estimate together with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

struct Panel {
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    depth: u32,
}

impl Quadrature {
    pub fn new(abs_tol: f64, rel_tol: f64, tail_cut: f64) -> Result<Self> {
        let q = Quadrature {
            abs_tol,
            rel_tol,
            tail_cut,
            ..Default::default()
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::domain("quadrature tolerances must be positive"));
        }
        if !(self.tail_cut >= 8.0) {
            return Err(Error::domain("quadrature tail_cut must be at least 8"));
        }
        Ok(())
    }

    /// Same config with both tolerances multiplied by `factor`.
    pub fn loosened(&self, factor: f64) -> Self {
        Quadrature {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            ..*self
        }
    }

    /// ∫ f over [lower, upper]; infinite endpoints truncate at ±tail_cut.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, lower: f64, upper: f64) -> Result<f64> {
        self.integrate_around(f, lower, upper, 0.0, 1.0)
    }

    /// ∫ f over [lower, upper] for an integrand whose mass sits around
    /// `center` with spread `scale`; infinite endpoints truncate at
    /// `center ± tail_cut · scale`.
    pub fn integrate_around<F: Fn(f64) -> f64>(
        &self,
        f: F,
        lower: f64,
        upper: f64,
        center: f64,
        scale: f64,
    ) -> Result<f64> {
        self.integrate_detailed(f, lower, upper, center, scale)
            .map(|r| r.value)
    }

    pub fn integrate_detailed<F: Fn(f64) -> f64>(
        &self,
        f: F,
        lower: f64,
        upper: f64,
        center: f64,
        scale: f64,
    ) -> Result<Integral> {
        self.validate()?;
        if lower.is_nan() || upper.is_nan() || !center.is_finite() || !(scale > 0.0) {
            return Err(Error::domain("integration limits must be ordered real numbers"));
        }
        let lo_cut = center - self.tail_cut * scale;
        let hi_cut = center + self.tail_cut * scale;
        let a = if lower == f64::NEG_INFINITY { lo_cut } else { lower };
        let b = if upper == f64::INFINITY { hi_cut } else { upper };
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::domain("integration limits must be ordered real numbers"));
        }
        if a == b {
            return Ok(Integral {
                value: 0.0,
                error: 0.0,
                evals: 0,
            });
        }
        if a > b {
            // a truncated semi-infinite range can invert when the finite
            // end lies beyond the cut; no mass is left to integrate there
            if lower == f64::NEG_INFINITY || upper == f64::INFINITY {
                return Ok(Integral {
                    value: 0.0,
                    error: 0.0,
                    evals: 0,
                });
            }
            return self
                .integrate_detailed(f, upper, lower, center, scale)
                .map(|r| Integral {
                    value: -r.value,
                    ..r
                });
        }

        let coarse = self.run(&f, a, b, None)?;
        let target = SAFETY * self.abs_tol.max(self.rel_tol * coarse.value.abs());
        let fine = self.run(&f, a, b, Some(target))?;
        let allowed = self.abs_tol.max(self.rel_tol * fine.value.abs());
        if fine.error <= allowed {
            Ok(fine)
        } else {
            Err(Error::Convergence {
                estimate: fine.value,
                error_bound: fine.error,
            })
        }
    }

    /// With `target == None` only the initial panels are evaluated (used to
    /// size the relative tolerance).
    fn run<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64, target: Option<f64>) -> Result<Integral> {
        let evals = Cell::new(0usize);
        let eval = |x: f64| -> Result<f64> {
            evals.set(evals.get() + 1);
            let y = f(x);
            if y.is_finite() {
                Ok(y)
            } else {
                Err(Error::domain(format!("integrand is not finite at x = {x}")))
            }
        };

        let width = b - a;
        let h = width / INITIAL_PANELS as f64;
        let mut xs = Vec::with_capacity(2 * INITIAL_PANELS + 1);
        for i in 0..=2 * INITIAL_PANELS {
            xs.push(if i == 2 * INITIAL_PANELS { b } else { a + 0.5 * h * i as f64 });
        }
        let ys = xs.iter().map(|&x| eval(x)).collect::<Result<Vec<_>>>()?;

        let mut stack: Vec<Panel> = (0..INITIAL_PANELS)
            .rev()
            .map(|i| {
                let (a, m, b) = (xs[2 * i], xs[2 * i + 1], xs[2 * i + 2]);
                let (fa, fm, fb) = (ys[2 * i], ys[2 * i + 1], ys[2 * i + 2]);
                Panel {
                    a,
                    fa,
                    m,
                    fm,
                    b,
                    fb,
                    whole: (b - a) / 6.0 * (fa + 4.0 * fm + fb),
                    depth: 0,
                }
            })
            .collect();

        let Some(target) = target else {
            let value = stack.iter().map(|p| p.whole).sum();
            return Ok(Integral {
                value,
                error: f64::INFINITY,
                evals: evals.get(),
            });
        };

        let mut value = 0.0;
        let mut error = 0.0;
        while let Some(p) = stack.pop() {
            if evals.get() >= self.max_evals {
                value += p.whole + stack.iter().map(|q| q.whole).sum::<f64>();
                return Err(Error::Convergence {
                    estimate: value,
                    error_bound: f64::INFINITY,
                });
            }
            let lm = 0.5 * (p.a + p.m);
            let rm = 0.5 * (p.m + p.b);
            let flm = eval(lm)?;
            let frm = eval(rm)?;
            let left = (p.m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
            let right = (p.b - p.m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
            let diff = left + right - p.whole;
            let budget = target * (p.b - p.a) / width;
            if diff.abs() <= 15.0 * budget || p.depth >= self.max_depth {
                value += left + right + diff / 15.0;
                error += diff.abs() / 15.0;
                continue;
            }
            stack.push(Panel {
                a: p.m,
                fa: p.fm,
                m: rm,
                fm: frm,
                b: p.b,
                fb: p.fb,
                whole: right,
                depth: p.depth + 1,
            });
            stack.push(Panel {
                a: p.a,
                fa: p.fa,
                m: lm,
                fm: flm,
                b: p.m,
                fb: p.fm,
                whole: left,
                depth: p.depth + 1,
            });
        }
        Ok(Integral {
            value,
            error,
            evals: evals.get(),
        })
    }
}

/// ∫ f over [lower, upper] with the given configuration.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lower: f64, upper: f64, cfg: &Quadrature) -> Result<f64> {
    cfg.integrate(f, lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::normal::pdf;

    #[test]
    fn normal_density_normalizes() {
        let q = Quadrature::default();
        let v = integrate(pdf, f64::NEG_INFINITY, f64::INFINITY, &q).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn normal_upper_tail() {
        let q = Quadrature::default();
        let v = integrate(pdf, 1.645, f64::INFINITY, &q).unwrap();
        assert!((v - 0.049_984_905_539_121_37).abs() < 1e-10, "{v}");
    }

    #[test]
    fn rectangle() {
        let q = Quadrature::default();
        let v = integrate(|_| 1.0, 0.0, 2.95, &q).unwrap();
        assert!((v - 2.95).abs() < 1e-14);
    }

    #[test]
    fn reversed_limits_negate() {
        let q = Quadrature::default();
        let v = integrate(|x| x * x, 3.0, 0.0, &q).unwrap();
        assert!((v + 9.0).abs() < 1e-10);
    }

    #[test]
    fn shifted_center_and_scale() {
        let q = Quadrature::default();
        let f = |x: f64| pdf((x - 40.0) / 5.0) / 5.0;
        let v = q
            .integrate_around(f, f64::NEG_INFINITY, f64::INFINITY, 40.0, 5.0)
            .unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn non_finite_integrand_is_domain_error() {
        let q = Quadrature::default();
        let r = integrate(|x| 1.0 / x, -1.0, 1.0, &q);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn exhausted_budget_reports_convergence() {
        let q = Quadrature {
            max_evals: 200,
            ..Default::default()
        };
        let r = integrate(|x: f64| (1.0 / (x + 1e-3)).sin(), 0.0, 1.0, &q);
        match r {
            Err(Error::Convergence { estimate, .. }) => assert!(estimate.is_finite()),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(Quadrature::new(0.0, 1e-9, 12.0).is_err());
        assert!(Quadrature::new(1e-10, 1e-9, 4.0).is_err());
        assert!(Quadrature::new(1e-10, 1e-9, 8.0).is_ok());
    }
}
