//! Command-line front end.
//!
//! `run` never touches the process environment: arguments, input and
//! output sinks are passed in, so the same entry point drives the binary
//! and the golden tests.

mod commands;
mod render;

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::design::{Family, Sides, TestModel};
use crate::error::Error;
use crate::evidence::PriorSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_COMPUTATION: i32 = 2;

const SUBCOMMANDS: [&str; 5] = ["design", "evidence", "verify", "stopping", "reanalyze"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "rejodds",
    version,
    about = "Pre- and post-experimental rejection odds, Bayes factors and p-value bounds",
    args_override_self = true
)]
struct Cli {
    /// TOML file whose keys act as default flag values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Master seed for stochastic subcommands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte Carlo run count.
    #[arg(long, global = true)]
    runs: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Average power, rejection ratio and pre-experimental odds.
    Design(DesignArgs),
    /// Bayes factor bound and Bayes factors for an observed result.
    Evidence(EvidenceArgs),
    /// Numerical checks of the frequentist expectation identities.
    Verify(VerifyArgs),
    /// Optional-stopping simulation.
    Stopping(StoppingArgs),
    /// Annotate a CSV of published p-values with Bayes factor bounds.
    Reanalyze(ReanalyzeArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, default_value = "z-mean", value_parser = parse_family)]
    family: Family,
    #[arg(long, default_value = "two", value_parser = parse_sides)]
    sides: Sides,
    /// Null value θ₀ (the null variance for the variance family).
    #[arg(long = "null", allow_negative_numbers = true)]
    null_value: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sd: f64,
    /// Sample size (per group for two-sample models).
    #[arg(long, default_value_t = 1)]
    n: u64,
    /// Second group size; defaults to `--n`.
    #[arg(long)]
    n2: Option<u64>,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Effect size spec (a prior on θ).
    #[arg(long, value_name = "PRIOR")]
    effect: Option<String>,
    /// Use this average power instead of computing it from an effect.
    #[arg(long)]
    power: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Prior odds of H1 to H0, as `a:b` or a number.
    #[arg(long, value_name = "ODDS")]
    prior_odds: Option<String>,
    /// Solve for the smallest n reaching this rejection ratio.
    #[arg(long)]
    target_r_pre: Option<f64>,
    /// Solve for the alpha giving these pre-experimental odds.
    #[arg(long)]
    target_odds: Option<f64>,
}

#[derive(Debug, Args)]
struct EvidenceArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Observed test statistic (z for mean families, x for the variance family).
    #[arg(long = "z", alias = "x", alias = "statistic", allow_negative_numbers = true)]
    statistic: Option<f64>,
    #[arg(long = "p")]
    p_value: Option<f64>,
    /// Prior under H1; repeat for several.
    #[arg(long = "prior", value_name = "PRIOR")]
    priors: Vec<String>,
    #[arg(long, value_name = "ODDS")]
    prior_odds: Option<String>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_name = "PRIOR")]
    prior: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also run the Monte Carlo check.
    #[arg(long)]
    mc: bool,
    /// Points per branch of the Bayes factor curve (csv output).
    #[arg(long, default_value_t = 41)]
    grid: usize,
}

#[derive(Debug, Args)]
struct StoppingArgs {
    #[arg(long, default_value = "two", value_parser = parse_sides)]
    sides: Sides,
    /// Start from an observed z (increments under H0).
    #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["start_p", "drift"])]
    start_z: Option<f64>,
    /// Start from the z whose p-value is this.
    #[arg(long, conflicts_with = "drift")]
    start_p: Option<f64>,
    /// Simulate the original sample and batches with this noncentrality.
    #[arg(long, allow_negative_numbers = true)]
    drift: Option<f64>,
    /// Number of extra batches.
    #[arg(long, default_value_t = 4)]
    batches: usize,
    /// Size of each extra batch as a fraction of the original sample.
    #[arg(long, default_value_t = 0.25)]
    batch_fraction: f64,
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    /// Trajectory end points echoed in json output.
    #[arg(long, default_value_t = 10)]
    retain: usize,
    /// Report the worked four-batch example under both sidedness readings.
    #[arg(long, conflicts_with_all = ["start_z", "start_p", "drift"])]
    four_looks: bool,
}

#[derive(Debug, Args)]
struct ReanalyzeArgs {
    /// Study CSV; `-` or absent reads stdin.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Emit the bound curve instead of annotating studies.
    #[arg(long)]
    curve: bool,
    #[arg(long, default_value_t = 0.0001)]
    p_lo: f64,
    /// Upper end of the curve; defaults to 1/e.
    #[arg(long)]
    p_hi: Option<f64>,
    #[arg(long, default_value_t = 50)]
    points: usize,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_sides(s: &str) -> Result<Sides, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl ModelArgs {
    fn model(&self) -> crate::Result<TestModel> {
        let mut m = match self.family {
            Family::ZMean => TestModel::z_mean(self.sides).with_n(self.n),
            Family::TwoSampleZ => {
                TestModel::two_sample_z(self.sides, self.n, self.n2.unwrap_or(self.n))
            }
            Family::NormalVariance => {
                let mut m = TestModel::normal_variance(self.null_value.unwrap_or(1.0));
                m.sides = self.sides;
                m.n1 = self.n;
                m
            }
        };
        if let Some(v) = self.null_value {
            m.null_value = v;
        }
        m.known_sd = self.sd;
        m.validate()?;
        Ok(m)
    }
}

/// Failure of a command, classified for the exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Runs the CLI on `argv` (including the program name) and returns the
/// exit code: 0 success, 1 bad input or usage, 2 failed computation.
pub fn run<I, T>(argv: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match apply_config_overlay(argv) {
        Ok(a) => a,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_VALIDATION;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_VALIDATION
                }
            };
        }
    };

    let mut out = Vec::new();
    let result = commands::dispatch(&cli, stdin, &mut out);
    match result {
        Ok(()) => match stdout.write_all(&out).and_then(|_| stdout.flush()) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_COMPUTATION
            }
        },
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            let _ = writeln!(stderr, "\nFor more information, try '--help'.");
            EXIT_VALIDATION
        }
        Err(Failure::Lib(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_COMPUTATION
            }
        }
    }
}

/// Parses prior odds written as `a:b` or as a single positive number.
fn parse_odds(s: &str) -> crate::Result<f64> {
    let bad = || Error::Domain(format!("prior odds must be `a:b` or a positive number, got `{s}`"));
    let v = match s.split_once(':') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Parses a prior, reading `grid:@file` from a `theta,weight` CSV.
fn parse_prior(s: &str) -> crate::Result<PriorSpec> {
    match s.strip_prefix("grid:@") {
        Some(path) => read_grid_file(Path::new(path)),
        None => s.parse(),
    }
}

fn read_grid_file(path: &Path) -> crate::Result<PriorSpec> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if header.iter().collect::<Vec<_>>() != ["theta", "weight"] {
        return Err(Error::Parse {
            line: 1,
            message: "grid file header must be `theta,weight`".into(),
        });
    }
    let (mut points, mut weights) = (Vec::new(), Vec::new());
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| {
            row[i].parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("`{}` is not a number", &row[i]),
            })
        };
        points.push(num(0)?);
        weights.push(num(1)?);
    }
    let prior = PriorSpec::grid(points, weights);
    prior.validate_shape()?;
    Ok(prior)
}

/// Inserts `--key value` pairs from the `--config` TOML right after the
/// subcommand, skipping keys given explicitly on the command line. Keys
/// may sit at the top level or under a `[subcommand]` table, which wins.
fn apply_config_overlay(argv: Vec<OsString>) -> std::result::Result<Vec<OsString>, String> {
    let strs: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let path = strs.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            strs.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(path) = path else { return Ok(argv) };
    let Some(sub_at) = strs.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let sub = strs[sub_at].as_str();

    let text = std::fs::read_to_string(&path).map_err(|e| format!("config {path}: {e}"))?;
    let table: toml::Table = text.parse().map_err(|e| format!("config {path}: {e}"))?;

    let mut merged: Vec<(String, toml::Value)> = Vec::new();
    let mut put = |k: &str, v: &toml::Value| {
        let key = k.replace('_', "-");
        merged.retain(|(old, _)| *old != key);
        merged.push((key, v.clone()));
    };
    for (k, v) in &table {
        if !v.is_table() {
            put(k, v);
        }
    }
    if let Some(toml::Value::Table(section)) = table.get(sub) {
        for (k, v) in section {
            put(k, v);
        }
    }

    let explicit = |key: &str| {
        let flag = format!("--{key}");
        let with_eq = format!("{flag}=");
        strs.iter().any(|a| *a == flag || a.starts_with(&with_eq))
    };
    let mut injected = Vec::new();
    for (key, value) in merged {
        if key == "config" || explicit(&key) {
            continue;
        }
        let flag = format!("--{key}");
        match value {
            toml::Value::Boolean(true) => injected.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                for item in items {
                    injected.push(flag.clone());
                    injected.push(scalar(&item, &key)?);
                }
            }
            other => {
                injected.push(flag);
                injected.push(scalar(&other, &key)?);
            }
        }
    }

    let mut out: Vec<OsString> = argv[..=sub_at].to_vec();
    out.extend(injected.into_iter().map(OsString::from));
    out.extend(argv[sub_at + 1..].iter().cloned());
    Ok(out)
}

fn scalar(v: &toml::Value, key: &str) -> std::result::Result<String, String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        _ => Err(format!("config key `{key}` must be a string, number, boolean or array")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut argv = vec!["rejodds"];
        argv.extend_from_slice(args);
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(argv, &mut std::io::empty(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn odds_parsing() {
        assert_eq!(parse_odds("1:4").unwrap(), 0.25);
        assert_eq!(parse_odds("0.5").unwrap(), 0.5);
        assert!(parse_odds("0:1").is_err());
        assert!(parse_odds("x").is_err());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, out, err) = run_str(&["evidence", "--bogus", "1"]);
        assert_eq!(code, EXIT_VALIDATION);
        assert!(out.is_empty());
        assert!(err.contains("Usage"));
    }

    #[test]
    fn help_goes_to_stdout() {
        let (code, out, _) = run_str(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("design"));
    }

    #[test]
    fn config_overlay_yields_to_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "p = 0.5\n[evidence]\np = 0.05\n").unwrap();
        let cfg = path.to_str().unwrap();
        let (code, out, _) = run_str(&["--config", cfg, "evidence"]);
        assert_eq!(code, 0);
        assert!(out.contains("bf_bound=2.456"), "{out}");
        let (_, out, _) = run_str(&["--config", cfg, "evidence", "--p", "0.001"]);
        assert!(out.contains("bf_bound=53.26"), "{out}");
    }

    #[test]
    fn grid_file_prior() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        std::fs::write(&path, "theta,weight\n1,0.5\n2,0.5\n").unwrap();
        let p = parse_prior(&format!("grid:@{}", path.display())).unwrap();
        assert_eq!(p, PriorSpec::grid(vec![1.0, 2.0], vec![0.5, 0.5]));
        std::fs::write(&path, "theta,weight\n1,0.5\n2,0.6\n").unwrap();
        assert!(parse_prior(&format!("grid:@{}", path.display())).is_err());
    }
}
