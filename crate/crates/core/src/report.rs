//! Serializable experiment reports.
//!
//! Reports are emitted as JSON with a fixed field order; every float is
//! written in scientific notation with 17 significant digits so that two
//! runs of the same manifest produce byte-identical files.

use std::collections::BTreeMap;
use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

/// One recorded failure of a checked property.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Violation {
    pub property: String,
    pub inputs: Value,
    pub expected: f64,
    pub actual: f64,
    pub residual: f64,
}

impl Violation {
    pub fn new(property: &str, inputs: Value, expected: f64, actual: f64, residual: f64) -> Self {
        Self {
            property: property.to_string(),
            inputs,
            expected,
            actual,
            residual,
        }
    }
}

/// Everything needed to reproduce a CLI run.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub space_id: String,
    pub seed: u64,
    pub tolerance_overrides: BTreeMap<String, f64>,
    pub output_path: Option<String>,
    pub version: String,
}

/// Deterministic record of a verification run.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ExperimentReport {
    pub command: String,
    pub space_id: String,
    pub seed: u64,
    pub params: BTreeMap<String, Value>,
    pub summary: BTreeMap<String, Value>,
    pub violations: Vec<Violation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

impl ExperimentReport {
    pub fn new(command: &str, space_id: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            space_id: space_id.to_string(),
            seed,
            params: BTreeMap::new(),
            summary: BTreeMap::new(),
            violations: Vec::new(),
            manifest: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params.insert(key.to_string(), to_value(value));
        self
    }

    pub fn set_summary(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), to_value(value));
    }

    pub fn push(&mut self, violation: Violation) {
        self.violations.push(violation);
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations_of(&self, property: &str) -> usize {
        self.violations
            .iter()
            .filter(|v| v.property == property)
            .count()
    }

    /// Numeric summary entry, if present.
    pub fn summary_f64(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(Value::as_f64)
    }

    /// Appends another report's violations and namespaced summary.
    pub fn absorb(&mut self, prefix: &str, other: ExperimentReport) {
        for (k, v) in other.summary {
            self.summary.insert(format!("{prefix}.{k}"), v);
        }
        self.violations.extend(other.violations);
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        to_json_bytes(self)
    }
}

/// Converts anything serializable into a JSON value; non-finite floats become null.
pub fn to_value(value: impl Serialize) -> Value {
    serde_json::to_value(value).unwrap_or(Value::Null)
}

struct FixedDigits<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Serializes with the fixed 17-significant-digit float format.
pub fn to_json_bytes(value: &impl Serialize) -> Vec<u8> {
    let mut out = Vec::new();
    let formatter = FixedDigits {
        inner: PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut out, formatter);
    value
        .serialize(&mut ser)
        .expect("serializing to an in-memory buffer cannot fail");
    out.push(b'\n');
    out
}
