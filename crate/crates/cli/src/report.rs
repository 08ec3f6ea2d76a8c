//! The report envelope and its byte-stable JSON encoding.

use std::io;

use pmfix::{CheckReport, Completeness, SampleOptions, Tolerances};
use serde::ser::Serialize;
use serde::Serialize as DeriveSerialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::commands::{EquivalenceSummary, PhiOutcome};
use crate::scenario::ConditionSpec;
use pmfix::{FalsifyOutcome, FixedPointResult, HypothesisReport};

pub const VERSION: &str = concat!("pmfix ", env!("CARGO_PKG_VERSION"));

/// What a single command run produced. Field order is the wire order.
#[derive(Debug, Clone, DeriveSerialize)]
pub struct Report {
    pub scenario: String,
    pub command: String,
    pub options: Options,
    pub reports: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Payload>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Payload>,
    pub version: &'static str,
}

/// Command-specific output, serialized without a variant tag.
#[derive(Debug, Clone, DeriveSerialize)]
#[serde(untagged)]
pub enum Payload {
    FixedPoint(FixedPointResult),
    Hypotheses(HypothesisReport),
    Phi(PhiOutcome),
    Equivalence(EquivalenceSummary),
    Falsify(FalsifyOutcome),
}

/// Everything that influenced the run, echoed back.
#[derive(Debug, Clone, DeriveSerialize)]
pub struct Options {
    pub tolerances: Tolerances,
    pub sampling: SampleOptions,
    pub completeness: Completeness,
    pub partial_metric: String,
    pub map: Vec<String>,
    pub phi: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<ConditionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Pretty printing with every float written as `{:.16e}`: 17 significant
/// digits, so the text round-trips and never depends on shortest-repr logic.
struct FixedFloats<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        // -0.0 and 0.0 print the same
        let value = if value == 0.0 { 0.0 } else { value };
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with fixed-precision floats and a
/// trailing newline.
pub fn to_stable_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut out, FixedFloats(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("report types always serialize");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}
