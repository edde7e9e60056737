//! Reanalysis of published p-values: CSV ingestion, Bayes factor bound
//! annotation, and plot-ready bound curves.

use std::collections::HashSet;
use std::f64::consts::E;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::bf_bound;
use crate::format::sig6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub study_id: String,
    pub p_value: f64,
    pub reported_bf: Option<f64>,
    /// The p-value came from a design with optional stopping.
    #[serde(default)]
    pub stopped: bool,
}

impl StudyRecord {
    pub fn new(study_id: impl Into<String>, p_value: f64) -> Self {
        StudyRecord {
            study_id: study_id.into(),
            p_value,
            reported_bf: None,
            stopped: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyFlag {
    Ok,
    ExceedsBound,
    BoundNa,
    StoppedNa,
}

impl ConsistencyFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            ConsistencyFlag::Ok => "ok",
            ConsistencyFlag::ExceedsBound => "exceeds_bound",
            ConsistencyFlag::BoundNa => "bound_na",
            ConsistencyFlag::StoppedNa => "stopped_na",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedRecord {
    #[serde(flatten)]
    pub record: StudyRecord,
    pub bf_bound: Option<f64>,
    pub reciprocal_bound: Option<f64>,
    pub flag: ConsistencyFlag,
}

const STUDY_ID: &str = "study_id";
const P_VALUE: &str = "p_value";
const REPORTED_BF: &str = "reported_bf";
const STOPPED: &str = "stopped";

struct Columns {
    id: usize,
    p: usize,
    bf: Option<usize>,
    stopped: Option<usize>,
}

fn header_columns(header: &csv::StringRecord) -> Result<Columns> {
    let parse_err = |message: String| Error::Parse { line: 1, message };
    let mut seen = HashSet::new();
    let (mut id, mut p, mut bf, mut stopped) = (None, None, None, None);
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        if !seen.insert(name) {
            return Err(parse_err(format!("duplicate column `{name}`")));
        }
        match name {
            STUDY_ID => id = Some(i),
            P_VALUE => p = Some(i),
            REPORTED_BF => bf = Some(i),
            STOPPED => stopped = Some(i),
            other => return Err(parse_err(format!("unknown column `{other}`"))),
        }
    }
    match (id, p) {
        (Some(id), Some(p)) => Ok(Columns { id, p, bf, stopped }),
        _ => Err(parse_err(format!("header must include `{STUDY_ID}` and `{P_VALUE}`"))),
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        _ => Error::Parse {
            line,
            message: e.to_string(),
        },
    }
}

/// Parses `study_id,p_value[,reported_bf][,stopped]` CSV (header required,
/// optional columns may be absent or empty). Errors cite 1-based lines.
pub fn parse_study_csv<R: Read>(source: R) -> Result<Vec<StudyRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    }
    let cols = header_columns(&header)?;

    let mut ids = HashSet::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |message: String| Error::Parse { line, message };
        let invalid = |message: String| Error::Validation { line, message };

        let study_id = row[cols.id].to_string();
        if study_id.is_empty() {
            return Err(invalid("study_id is empty".into()));
        }
        let p_text = &row[cols.p];
        let p_value: f64 = p_text
            .parse()
            .map_err(|_| parse_err(format!("p_value `{p_text}` is not a number")))?;
        if !(p_value > 0.0 && p_value < 1.0) {
            return Err(invalid(format!("p_value {p_text} outside (0, 1)")));
        }
        let reported_bf = match cols.bf.map(|i| &row[i]) {
            None | Some("") => None,
            Some(text) => {
                let v: f64 = text
                    .parse()
                    .map_err(|_| parse_err(format!("reported_bf `{text}` is not a number")))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(format!("reported_bf {text} must be positive")));
                }
                Some(v)
            }
        };
        let stopped = match cols.stopped.map(|i| &row[i]) {
            None | Some("") | Some("false") => false,
            Some("true") => true,
            Some(text) => {
                return Err(parse_err(format!("stopped must be true or false, got `{text}`")))
            }
        };
        if !ids.insert(study_id.clone()) {
            return Err(invalid(format!("duplicate study_id `{study_id}`")));
        }
        records.push(StudyRecord {
            study_id,
            p_value,
            reported_bf,
            stopped,
        });
    }
    Ok(records)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn io(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map(f).unwrap_or_default()
}

/// Writes records with all four columns; floats use the shortest text
/// that parses back to the same value.
pub fn emit_study_csv(records: &[StudyRecord]) -> Result<String> {
    let mut w = csv_writer();
    w.write_record([STUDY_ID, P_VALUE, REPORTED_BF, STOPPED]).map_err(io)?;
    for r in records {
        w.write_record([
            r.study_id.clone(),
            r.p_value.to_string(),
            opt(r.reported_bf, |v| v.to_string()),
            r.stopped.to_string(),
        ])
        .map_err(io)?;
    }
    finish(w)
}

/// Bound and consistency flag for each record. Stopped records never get
/// a bound, since the bound assumes a p-value that is uniform under H₀.
pub fn annotate_bounds(records: &[StudyRecord]) -> Result<Vec<AnnotatedRecord>> {
    records
        .iter()
        .map(|r| {
            let (bound, flag) = if r.stopped {
                (None, ConsistencyFlag::StoppedNa)
            } else {
                match bf_bound(r.p_value)? {
                    None => (None, ConsistencyFlag::BoundNa),
                    Some(b) => match r.reported_bf {
                        Some(bf) if bf > b => (Some(b), ConsistencyFlag::ExceedsBound),
                        _ => (Some(b), ConsistencyFlag::Ok),
                    },
                }
            };
            Ok(AnnotatedRecord {
                record: r.clone(),
                bf_bound: bound,
                reciprocal_bound: bound.map(|b| 1.0 / b),
                flag,
            })
        })
        .collect()
}

/// Input columns plus `bf_bound,reciprocal_bound,flag`; the added numbers
/// carry six significant digits and absent bounds are empty.
pub fn emit_annotated_csv(rows: &[AnnotatedRecord]) -> Result<String> {
    let mut w = csv_writer();
    w.write_record([
        STUDY_ID,
        P_VALUE,
        REPORTED_BF,
        STOPPED,
        "bf_bound",
        "reciprocal_bound",
        "flag",
    ])
    .map_err(io)?;
    for a in rows {
        let r = &a.record;
        w.write_record([
            r.study_id.clone(),
            r.p_value.to_string(),
            opt(r.reported_bf, |v| v.to_string()),
            r.stopped.to_string(),
            opt(a.bf_bound, sig6),
            opt(a.reciprocal_bound, sig6),
            a.flag.as_str().to_string(),
        ])
        .map_err(io)?;
    }
    finish(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub p: f64,
    pub bound: f64,
    pub reciprocal: f64,
}

/// Log-spaced bound curve from `p_lo` to `p_hi` inclusive.
pub fn emit_bound_curve(p_lo: f64, p_hi: f64, points: usize) -> Result<Vec<BoundPoint>> {
    if !(p_lo > 0.0 && p_lo < p_hi && p_hi <= 1.0 / E) {
        return Err(Error::domain(format!(
            "bound curve needs 0 < p_lo < p_hi <= 1/e, got [{p_lo}, {p_hi}]"
        )));
    }
    if points < 2 {
        return Err(Error::domain("bound curve needs at least 2 points"));
    }
    let (a, b) = (p_lo.ln(), p_hi.ln());
    let step = (b - a) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let p = match i {
                0 => p_lo,
                i if i + 1 == points => p_hi,
                i => (a + step * i as f64).exp(),
            };
            let bound = bf_bound(p)?.expect("p <= 1/e has a bound");
            Ok(BoundPoint {
                p,
                bound,
                reciprocal: 1.0 / bound,
            })
        })
        .collect()
}

/// CSV `p,bound,reciprocal` with six significant digits.
pub fn bound_curve_csv(curve: &[BoundPoint]) -> String {
    let mut out = String::from("p,bound,reciprocal\n");
    for c in curve {
        out.push_str(&format!("{},{},{}\n", sig6(c.p), sig6(c.bound), sig6(c.reciprocal)));
    }
    out
}
