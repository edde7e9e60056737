use std::io::Write;

use serde_json::Value;

use super::Format;
use crate::format::{round_sig, sig6};

/// Digits kept for numbers in detailed and machine output.
pub const DETAIL_DIGITS: usize = 6;

pub enum Field {
    Num(f64),
    Int(u64),
    Text(String),
    /// Not applicable; rendered as `n/a` in text and empty in csv.
    Missing,
}

impl Field {
    pub fn opt(v: Option<f64>) -> Field {
        v.map(Field::Num).unwrap_or(Field::Missing)
    }

    fn text(&self) -> String {
        match self {
            Field::Num(v) => sig6(*v),
            Field::Int(v) => v.to_string(),
            Field::Text(s) => s.clone(),
            Field::Missing => "n/a".into(),
        }
    }

    fn csv(&self) -> String {
        match self {
            Field::Missing => String::new(),
            other => other.text(),
        }
    }
}

/// One command's output in every format.
pub struct Report {
    /// Leading text-mode lines (headline values at reporting precision).
    pub head: Vec<String>,
    /// `key=value` detail lines in text mode, `key,value` rows in csv.
    pub fields: Vec<(String, Field)>,
    /// Replaces the key/value csv when the natural csv is a table.
    pub csv: Option<String>,
    pub json: Value,
}

impl Report {
    pub fn new(json: Value) -> Self {
        Report {
            head: Vec::new(),
            fields: Vec::new(),
            csv: None,
            json,
        }
    }

    pub fn field(&mut self, key: impl Into<String>, value: Field) {
        self.fields.push((key.into(), value));
    }

    pub fn emit(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Text => {
                for line in &self.head {
                    writeln!(out, "{line}")?;
                }
                for (k, v) in &self.fields {
                    writeln!(out, "{k}={}", v.text())?;
                }
            }
            Format::Csv => match &self.csv {
                Some(table) => out.write_all(table.as_bytes())?,
                None => {
                    let mut w = csv::WriterBuilder::new()
                        .terminator(csv::Terminator::Any(b'\n'))
                        .from_writer(Vec::new());
                    let rows = std::iter::once(["name".to_string(), "value".to_string()])
                        .chain(self.fields.iter().map(|(k, v)| [k.clone(), v.csv()]));
                    for row in rows {
                        w.write_record(row).map_err(std::io::Error::other)?;
                    }
                    out.write_all(&w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?)?;
                }
            },
            Format::Json => {
                let v = round_json(self.json.clone());
                let text = serde_json::to_string_pretty(&v).map_err(std::io::Error::other)?;
                writeln!(out, "{text}")?;
            }
        }
        Ok(())
    }
}

/// Rounds every float in a JSON tree to six significant digits.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            serde_json::Number::from_f64(round_sig(x, DETAIL_DIGITS))
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}
