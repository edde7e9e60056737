use std::f64::consts::E;
use std::io::{Read, Write};

use serde_json::json;

use super::render::{Field, Report};
use super::{
    parse_odds, parse_prior, Cli, CmdResult, Command, DesignArgs, EvidenceArgs, Failure,
    ReanalyzeArgs, StoppingArgs, VerifyArgs,
};
use crate::design::{self, TestModel};
use crate::evidence;
use crate::format::{sig, sig_fixed};
use crate::freqcheck::{self, RejectionRegion};
use crate::mathcore::{Quadrature, RngContract};
use crate::reanalyze;
use crate::stopping::{self, Start, StoppingConfig};

/// Stream ids keep the subcommands' random numbers apart under one seed.
const VERIFY_STREAM: u64 = 1;
const STOPPING_STREAM: u64 = 2;

const DEFAULT_MC_RUNS: u64 = 1_000_000;
const DEFAULT_STOPPING_RUNS: u64 = 100_000;

pub(super) fn dispatch(cli: &Cli, stdin: &mut dyn Read, out: &mut dyn Write) -> CmdResult {
    let report = match &cli.command {
        Command::Design(a) => design_cmd(a)?,
        Command::Evidence(a) => evidence_cmd(a)?,
        Command::Verify(a) => verify_cmd(cli, a)?,
        Command::Stopping(a) => stopping_cmd(cli, a)?,
        Command::Reanalyze(a) => reanalyze_cmd(a, stdin)?,
    };
    report.emit(cli.format, out)?;
    Ok(())
}

fn usage(msg: &str) -> Failure {
    Failure::Usage(msg.to_string())
}

fn model_fields(r: &mut Report, m: &TestModel) {
    r.field("family", Field::Text(m.family.to_string()));
    r.field("sides", Field::Text(m.sides.to_string()));
    r.field("null", Field::Num(m.null_value));
    r.field("sd", Field::Num(m.known_sd));
    r.field("n1", Field::Int(m.n1));
    if m.family == design::Family::TwoSampleZ {
        r.field("n2", Field::Int(m.n2));
    }
}

fn design_cmd(a: &DesignArgs) -> Result<Report, Failure> {
    let mut model = a.model.model()?;
    let prior_odds = a.prior_odds.as_deref().map(parse_odds).transpose()?;
    let effect = a.effect.as_deref().map(parse_prior).transpose()?;

    if let Some(target) = a.target_odds {
        let odds = prior_odds.ok_or_else(|| usage("--target-odds needs --prior-odds"))?;
        let power = match (a.power, &effect) {
            (Some(p), None) => p,
            (None, Some(e)) => design::compute_power(&model, e, a.alpha)?.avg_power,
            _ => return Err(usage("--target-odds needs exactly one of --power or --effect")),
        };
        let alpha = design::solve_alpha(odds, power, target)?;
        let mut r = Report::new(json!({
            "alpha": alpha,
            "avg_power": power,
            "prior_odds": odds,
            "target_o_pre": target,
        }));
        r.head.push(format!("alpha={}", sig(alpha, 12)));
        r.field("avg_power", Field::Num(power));
        r.field("prior_odds", Field::Num(odds));
        r.field("target_o_pre", Field::Num(target));
        r.field("r_pre", Field::Num(power / alpha));
        return Ok(r);
    }

    let mut solved_n = None;
    if let Some(target) = a.target_r_pre {
        let e = effect.as_ref().ok_or_else(|| usage("--target-r-pre needs --effect"))?;
        let n = design::solve_sample_size(&model, e, a.alpha, target)?;
        model = model.with_n(n);
        solved_n = Some(n);
    }

    let (power, boundary, per_theta) = match (a.power, &effect) {
        (Some(p), None) => {
            let region = RejectionRegion::for_model(&model, a.alpha)?;
            (p, region.boundary(), Vec::new())
        }
        (None, Some(e)) => {
            let res = design::compute_power(&model, e, a.alpha)?;
            (res.avg_power, res.rejection_boundary, res.per_theta_power)
        }
        _ => return Err(usage("design needs exactly one of --effect or --power")),
    };
    let rep = design::RejectionReport::from_power(a.alpha, power, prior_odds)?;

    let mut r = Report::new(json!({
        "model": model,
        "effect": effect.as_ref().map(|e| e.to_string()),
        "solved_n": solved_n,
        "alpha": rep.alpha,
        "rejection_boundary": boundary,
        "avg_power": rep.avg_power,
        "r_pre": rep.r_pre,
        "prior_odds": rep.prior_odds,
        "o_pre": rep.o_pre,
        "per_theta_power": per_theta,
    }));
    if let Some(n) = solved_n {
        r.head.push(format!("n={n}"));
    }
    r.head.push(format!("power={:.2} r_pre={:.1}", rep.avg_power, rep.r_pre));
    model_fields(&mut r, &model);
    r.field(
        "effect",
        effect.map(|e| Field::Text(e.to_string())).unwrap_or(Field::Missing),
    );
    r.field("alpha", Field::Num(rep.alpha));
    r.field("rejection_boundary", Field::Num(boundary));
    r.field("avg_power", Field::Num(rep.avg_power));
    r.field("r_pre", Field::Num(rep.r_pre));
    r.field("prior_odds", Field::opt(rep.prior_odds));
    r.field("o_pre", Field::opt(rep.o_pre));
    Ok(r)
}

fn evidence_cmd(a: &EvidenceArgs) -> Result<Report, Failure> {
    let model = a.model.model()?;
    let prior_odds = a.prior_odds.as_deref().map(parse_odds).transpose()?;
    let priors = a.priors.iter().map(|s| parse_prior(s)).collect::<crate::Result<Vec<_>>>()?;
    if a.statistic.is_none() && a.p_value.is_none() {
        return Err(usage("evidence needs --z or --p"));
    }
    let rep = evidence::evidence_report(&model, a.statistic, a.p_value, &priors, prior_odds)?;

    let mut r = Report::new(serde_json::to_value(&rep).map_err(|e| crate::Error::Io(e.to_string()))?);
    r.head.push(match rep.bf_bound {
        Some(b) => format!("bf_bound={} ({})", sig_fixed(b, 4), rep.bound_note),
        None => format!("bf_bound=n/a ({})", rep.bound_note),
    });
    for e in &rep.bf_entries {
        r.head.push(format!("r_post={} prior={}", sig_fixed(e.r_post, 3), e.prior));
    }
    r.field("p_value", Field::Num(rep.p_value));
    r.field("statistic", Field::opt(rep.statistic));
    r.field("bf_bound", Field::opt(rep.bf_bound));
    r.field("reciprocal_bound", Field::opt(rep.bf_bound.map(|b| 1.0 / b)));
    for e in &rep.bf_entries {
        r.field(format!("r_post[{}]", e.prior), Field::Num(e.r_post));
        if let Some(note) = &e.note {
            r.field(format!("note[{}]", e.prior), Field::Text(note.clone()));
        }
    }
    r.field("prior_odds", Field::opt(rep.prior_odds));
    r.field("o_post_bound", Field::opt(rep.o_post_bound));
    for e in &rep.bf_entries {
        r.field(format!("o_post[{}]", e.prior), Field::opt(e.o_post));
    }
    Ok(r)
}

fn verify_cmd(cli: &Cli, a: &VerifyArgs) -> Result<Report, Failure> {
    let model = a.model.model()?;
    let prior = parse_prior(&a.prior)?;
    let region = RejectionRegion::for_model(&model, a.alpha)?;
    let cfg = Quadrature::default();
    let check = freqcheck::verify_identities(&model, &prior, &region, &cfg)?;

    let mc = if a.mc {
        let seed = RngContract::new(cli.seed.unwrap_or(0), VERIFY_STREAM);
        let runs = cli.runs.unwrap_or(DEFAULT_MC_RUNS);
        Some(freqcheck::mc_check_identity(&model, &prior, &region, runs, seed)?)
    } else {
        None
    };
    let curve = freqcheck::bf_curve_over_region(&model, &prior, &region, a.grid)?;

    let mut r = Report::new(json!({
        "model": model,
        "prior": prior.to_string(),
        "region": region,
        "check": check,
        "monte_carlo": mc,
    }));
    r.csv = Some(freqcheck::curve_to_csv(&curve));
    r.head.push(format!("r_pre={}", sig_fixed(check.r_pre, 4)));
    model_fields(&mut r, &model);
    r.field("prior", Field::Text(prior.to_string()));
    r.field("alpha", Field::Num(check.alpha));
    r.field("rejection_boundary", Field::Num(region.boundary()));
    r.field("avg_power", Field::Num(check.avg_power));
    for (name, v) in [
        ("e_bf_null", check.identity1),
        ("e_inv_bf_marginal", check.identity2),
        ("curve_average", check.curve_average),
    ] {
        r.field(name, Field::Num(v.computed));
        r.field(format!("{name}_target"), Field::Num(v.target));
        r.field(format!("{name}_rel_error"), Field::Text(sig(v.rel_error, 2)));
    }
    r.field("note", Field::Text(check.caveat.clone()));
    if let Some(mc) = mc {
        r.field("mc_estimate", Field::Num(mc.estimate));
        r.field("mc_std_error", Field::Num(mc.std_error));
        r.field("mc_target", Field::Num(mc.target));
        r.field("mc_z_score", Field::Num(mc.z_score));
        r.field("mc_runs", Field::Int(mc.n_runs));
        r.field("mc_seed", Field::Int(mc.seed.master_seed));
    }
    Ok(r)
}

fn stopping_cmd(cli: &Cli, a: &StoppingArgs) -> Result<Report, Failure> {
    let seed = RngContract::new(cli.seed.unwrap_or(0), STOPPING_STREAM);
    let runs = cli.runs.unwrap_or(DEFAULT_STOPPING_RUNS);

    if a.four_looks {
        let rows = stopping::four_look_comparison(runs, seed)?;
        let mut r = Report::new(json!({ "runs": runs, "seed": seed, "rows": rows }));
        let mut table = String::from("sides,start_z,estimate,std_error,claimed\n");
        for row in &rows {
            r.head.push(format!(
                "sides={} stop_prob={} std_error={} claimed={}",
                row.sides,
                sig_fixed(row.estimate, 4),
                sig(row.std_error, 2),
                sig_fixed(row.claimed, 4)
            ));
            table.push_str(&format!(
                "{},{},{},{},{}\n",
                row.sides,
                sig(row.start_z, 6),
                sig(row.estimate, 6),
                sig(row.std_error, 6),
                sig(row.claimed, 6)
            ));
            r.field(format!("start_z[{}]", row.sides), Field::Num(row.start_z));
        }
        r.field("runs", Field::Int(runs));
        r.field("seed", Field::Int(seed.master_seed));
        r.csv = Some(table);
        return Ok(r);
    }

    let start = match (a.start_z, a.start_p, a.drift) {
        (Some(z), _, _) => Start::FixedZ { z },
        (None, Some(p), _) => Start::FixedZ {
            z: TestModel::z_mean(a.sides).statistic_for_p(p)?,
        },
        (None, None, Some(d)) => Start::SimulateEffect { d },
        (None, None, None) => Start::SimulateNull,
    };
    let mut cfg = StoppingConfig::new(start, vec![], a.threshold, a.sides)
        .with_batches(a.batches, a.batch_fraction)
        .with_runs(runs, seed);
    cfg.retain = a.retain;
    let rep = stopping::simulate_sequential(&cfg)?;

    let mut r = Report::new(serde_json::to_value(&rep).map_err(|e| crate::Error::Io(e.to_string()))?);
    r.head.push(format!(
        "stop_prob={} std_error={}",
        sig_fixed(rep.cumulative_stop_prob, 4),
        sig(rep.std_error, 2)
    ));
    let mut table = String::from("stage,total_fraction,stop_prob,std_error\n");
    let mut t = cfg.initial_fraction;
    for (i, (p, se)) in rep.per_stage_stop_prob.iter().zip(&rep.per_stage_std_error).enumerate() {
        if i > 0 {
            t += cfg.batch_fractions[i - 1];
        }
        table.push_str(&format!("{i},{},{},{}\n", sig(t, 6), sig(*p, 6), sig(*se, 6)));
        r.field(format!("stage[{i}]"), Field::Num(*p));
    }
    r.csv = Some(table);
    r.field("sides", Field::Text(a.sides.to_string()));
    r.field("threshold", Field::Num(cfg.threshold_p));
    r.field("stages", Field::Int(cfg.stages() as u64));
    r.field("cumulative_stop_prob", Field::Num(rep.cumulative_stop_prob));
    r.field("std_error", Field::Num(rep.std_error));
    r.field("runs", Field::Int(runs));
    r.field("seed", Field::Int(seed.master_seed));
    Ok(r)
}

fn reanalyze_cmd(a: &ReanalyzeArgs, stdin: &mut dyn Read) -> Result<Report, Failure> {
    if a.curve {
        let p_hi = a.p_hi.unwrap_or(1.0 / E);
        let curve = reanalyze::emit_bound_curve(a.p_lo, p_hi, a.points)?;
        let mut r = Report::new(json!(curve));
        for c in &curve {
            r.head.push(format!("p={} bf_bound={} reciprocal={}", sig(c.p, 6), sig(c.bound, 6), sig(c.reciprocal, 6)));
        }
        r.csv = Some(reanalyze::bound_curve_csv(&curve));
        return Ok(r);
    }

    let records = match a.input.as_deref() {
        None => reanalyze::parse_study_csv(stdin)?,
        Some(p) if p.as_os_str() == "-" => reanalyze::parse_study_csv(stdin)?,
        Some(p) => {
            let f = std::fs::File::open(p)
                .map_err(|e| crate::Error::Io(format!("{}: {e}", p.display())))?;
            reanalyze::parse_study_csv(f)?
        }
    };
    let annotated = reanalyze::annotate_bounds(&records)?;
    let mut r = Report::new(json!(annotated));
    for x in &annotated {
        let opt = |v: Option<f64>| v.map(|v| sig(v, 6)).unwrap_or_else(|| "n/a".into());
        r.head.push(format!(
            "{} p={} bf_bound={} reciprocal={} flag={}",
            x.record.study_id,
            sig(x.record.p_value, 6),
            opt(x.bf_bound),
            opt(x.reciprocal_bound),
            x.flag.as_str()
        ));
    }
    r.csv = Some(reanalyze::emit_annotated_csv(&annotated)?);
    Ok(r)
}
