//! Deterministic JSON report documents.
//!
//! Serialization is a pure function of the document value: keys are sorted,
//! floats are written with 17 significant digits in exponent form, lines end
//! with LF, and indentation is fixed at two spaces. Two saves of equal
//! documents are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::IoError;

pub const SCHEMA_VERSION: &str = "1.0";

/// A node in a report payload tree.
#[derive(Debug, Clone, PartialEq)]
pub enum ReportValue {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Array(Vec<ReportValue>),
    Map(BTreeMap<String, ReportValue>),
}

impl ReportValue {
    pub fn map(entries: Vec<(&str, ReportValue)>) -> Self {
        Self::Map(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn floats(values: &[f64]) -> Self {
        Self::Array(values.iter().map(|&v| Self::Float(v)).collect())
    }

    pub fn ints(values: &[usize]) -> Self {
        Self::Array(values.iter().map(|&v| Self::Int(v as i64)).collect())
    }

    /// Optional floats serialize as `null` when undefined.
    pub fn opt_floats(values: &[Option<f64>]) -> Self {
        Self::Array(values.iter().map(|v| v.map_or(Self::Null, Self::Float)).collect())
    }

    pub fn opt_float(value: Option<f64>) -> Self {
        value.map_or(Self::Null, Self::Float)
    }
}

/// Versioned document with a named payload tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportDocument {
    pub schema_version: String,
    pub payload: BTreeMap<String, ReportValue>,
}

impl ReportDocument {
    pub fn new() -> Self {
        Self { schema_version: SCHEMA_VERSION.to_string(), payload: BTreeMap::new() }
    }

    pub fn insert(&mut self, key: &str, value: ReportValue) -> &mut Self {
        self.payload.insert(key.to_string(), value);
        self
    }

    /// Renders the document. Non-finite floats are rejected with a schema
    /// error; nothing else can fail.
    pub fn to_json(&self) -> Result<String, IoError> {
        let mut root = BTreeMap::new();
        root.insert("payload".to_string(), ReportValue::Map(self.payload.clone()));
        root.insert("schema_version".to_string(), ReportValue::Str(self.schema_version.clone()));
        let mut out = String::new();
        write_value(&mut out, &ReportValue::Map(root), 0)?;
        out.push('\n');
        Ok(out)
    }
}

impl Default for ReportDocument {
    fn default() -> Self {
        Self::new()
    }
}

/// Writes a report document to disk with deterministic bytes.
pub fn save_report(doc: &ReportDocument, path: &Path) -> Result<(), IoError> {
    let json = doc.to_json()?;
    fs::write(path, json).map_err(|source| IoError::Write { path: path.to_path_buf(), source })
}

/// 17 significant digits, exponent form; enough to round-trip any f64.
pub(crate) fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_value(out: &mut String, value: &ReportValue, indent: usize) -> Result<(), IoError> {
    match value {
        ReportValue::Null => out.push_str("null"),
        ReportValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ReportValue::Int(i) => out.push_str(&i.to_string()),
        ReportValue::Float(f) => {
            if !f.is_finite() {
                return Err(IoError::Schema { reason: format!("non-finite float {f} in report") });
            }
            out.push_str(&format_float(*f));
        }
        ReportValue::Str(s) => write_string(out, s),
        ReportValue::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return Ok(());
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(out, indent + 1);
                write_value(out, item, indent + 1)?;
            }
            out.push('\n');
            push_indent(out, indent);
            out.push(']');
        }
        ReportValue::Map(entries) => {
            if entries.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            out.push('{');
            for (i, (key, item)) in entries.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(out, indent + 1);
                write_string(out, key);
                out.push_str(": ");
                write_value(out, item, indent + 1)?;
            }
            out.push('\n');
            push_indent(out, indent);
            out.push('}');
        }
    }
    Ok(())
}

fn push_indent(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn write_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}
