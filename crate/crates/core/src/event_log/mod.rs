//! Event log model: cases, events and their attributes.
//!
//! A log is held fully in memory and is immutable once built. Cases are kept in
//! canonical order (first-event timestamp, then case id) whenever every case is
//! timestamped, so splitting a log by fractions follows time.

mod csv_format;
mod xes;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_format::{parse_csv, write_csv, CsvSchemaConfig, StaticColumns};
pub use xes::parse_xes;

/// Names that may never be used for attributes.
pub const RESERVED_NAMES: [&str; 3] = ["case_id", "activity", "timestamp"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AttrValue {
    Str(String),
    Num(f64),
    Bool(bool),
    /// Explicit marker for a missing value.
    Absent,
}

impl AttrValue {
    pub fn is_absent(&self) -> bool {
        matches!(self, AttrValue::Absent)
    }

    fn kind_hint(&self) -> Option<AttrKind> {
        match self {
            AttrValue::Str(_) => Some(AttrKind::String),
            AttrValue::Num(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Some(AttrKind::Int),
            AttrValue::Num(_) => Some(AttrKind::Float),
            AttrValue::Bool(_) => Some(AttrKind::Boolean),
            AttrValue::Absent => None,
        }
    }
}

/// Declared value kind of an attribute. Int, Float and Date values are all
/// stored as [`AttrValue::Num`]; dates are milliseconds since the epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttrKind {
    String,
    Int,
    Float,
    Boolean,
    Date,
}

impl AttrKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, AttrKind::Int | AttrKind::Float | AttrKind::Date)
    }

    pub fn accepts(self, value: &AttrValue) -> bool {
        match value {
            AttrValue::Absent => true,
            AttrValue::Str(_) => self == AttrKind::String,
            AttrValue::Num(v) => match self {
                AttrKind::Int => v.fract() == 0.0,
                AttrKind::Float | AttrKind::Date => v.is_finite(),
                _ => false,
            },
            AttrValue::Bool(_) => self == AttrKind::Boolean,
        }
    }

    /// Combines two observed kinds; Int widens to Float, anything else must agree.
    fn merge(self, other: AttrKind) -> Option<AttrKind> {
        match (self, other) {
            (a, b) if a == b => Some(a),
            (AttrKind::Int, AttrKind::Float) | (AttrKind::Float, AttrKind::Int) => {
                Some(AttrKind::Float)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttrScope {
    Static,
    Dynamic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttrSpec {
    pub kind: AttrKind,
    pub scope: AttrScope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub activity: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: Option<i64>,
    pub attrs: BTreeMap<String, AttrValue>,
}

impl Event {
    pub fn new(activity: impl Into<String>) -> Self {
        Event {
            activity: activity.into(),
            timestamp: None,
            attrs: BTreeMap::new(),
        }
    }

    pub fn at(mut self, timestamp: i64) -> Self {
        self.timestamp = Some(timestamp);
        self
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: AttrValue) -> Self {
        self.attrs.insert(name.into(), value);
        self
    }

    pub fn attr(&self, name: &str) -> &AttrValue {
        self.attrs.get(name).unwrap_or(&AttrValue::Absent)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub case_id: String,
    pub static_attrs: BTreeMap<String, AttrValue>,
    pub events: Vec<Event>,
}

impl Case {
    pub fn new(case_id: impl Into<String>, events: Vec<Event>) -> Self {
        Case {
            case_id: case_id.into(),
            static_attrs: BTreeMap::new(),
            events,
        }
    }

    pub fn with_static(mut self, name: impl Into<String>, value: AttrValue) -> Self {
        self.static_attrs.insert(name.into(), value);
        self
    }

    pub fn static_attr(&self, name: &str) -> &AttrValue {
        self.static_attrs.get(name).unwrap_or(&AttrValue::Absent)
    }

    pub fn activities(&self) -> Vec<&str> {
        self.events.iter().map(|e| e.activity.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn first_timestamp(&self) -> Option<i64> {
        self.events.first().and_then(|e| e.timestamp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    cases: Vec<Case>,
    activity_alphabet: Vec<String>,
    attr_schema: BTreeMap<String, AttrSpec>,
}

impl EventLog {
    /// Builds a log with the given schema, validating every case against it.
    /// Cases are put into canonical order.
    pub fn with_schema(cases: Vec<Case>, attr_schema: BTreeMap<String, AttrSpec>) -> Result<Self> {
        for name in attr_schema.keys() {
            if RESERVED_NAMES.contains(&name.as_str()) {
                return Err(Error::ReservedAttribute(name.clone()));
            }
        }
        let mut seen_ids = BTreeSet::new();
        for case in &cases {
            if !seen_ids.insert(case.case_id.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate case id `{}`",
                    case.case_id
                )));
            }
            validate_case(case, &attr_schema)?;
        }
        let mut log = EventLog {
            activity_alphabet: alphabet_of(&cases),
            cases,
            attr_schema,
        };
        log.canonicalize();
        Ok(log)
    }

    /// Builds a log, inferring the attribute schema from the values present.
    pub fn from_cases(cases: Vec<Case>) -> Result<Self> {
        // `None` until a non-absent value pins the kind.
        let mut seen: BTreeMap<String, (Option<AttrKind>, AttrScope)> = BTreeMap::new();
        let mut observe = |name: &str, value: &AttrValue, scope: AttrScope| -> Result<()> {
            let hint = value.kind_hint();
            let entry = seen.entry(name.to_string()).or_insert((hint, scope));
            if entry.1 != scope {
                return Err(Error::InvalidConfig(format!(
                    "attribute `{name}` used both as static and dynamic"
                )));
            }
            entry.0 = match (entry.0, hint) {
                (Some(a), Some(b)) => Some(a.merge(b).ok_or_else(|| Error::SchemaConflict {
                    name: name.to_string(),
                    first: a,
                    second: b,
                })?),
                (a, b) => a.or(b),
            };
            Ok(())
        };
        for case in &cases {
            for (name, value) in &case.static_attrs {
                observe(name, value, AttrScope::Static)?;
            }
            for event in &case.events {
                for (name, value) in &event.attrs {
                    observe(name, value, AttrScope::Dynamic)?;
                }
            }
        }
        let schema = seen
            .into_iter()
            .map(|(name, (kind, scope))| {
                let kind = kind.unwrap_or(AttrKind::String);
                (name, AttrSpec { kind, scope })
            })
            .collect();
        Self::with_schema(cases, schema)
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn into_cases(self) -> Vec<Case> {
        self.cases
    }

    pub fn activity_alphabet(&self) -> &[String] {
        &self.activity_alphabet
    }

    pub fn attr_schema(&self) -> &BTreeMap<String, AttrSpec> {
        &self.attr_schema
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.cases.iter().map(Case::len).sum()
    }

    /// Attribute names of one scope, in schema (lexicographic) order.
    pub fn attr_names(&self, scope: AttrScope) -> Vec<(String, AttrKind)> {
        self.attr_schema
            .iter()
            .filter(|(_, spec)| spec.scope == scope)
            .map(|(name, spec)| (name.clone(), spec.kind))
            .collect()
    }

    /// A log over a subset of this log's cases, sharing its schema.
    pub fn sub_log(&self, cases: Vec<Case>) -> EventLog {
        EventLog {
            activity_alphabet: alphabet_of(&cases),
            cases,
            attr_schema: self.attr_schema.clone(),
        }
    }

    /// Sorts cases by (first-event timestamp, case id) when every case has a
    /// first timestamp; otherwise keeps file order.
    fn canonicalize(&mut self) {
        if self.cases.iter().all(|c| c.first_timestamp().is_some()) {
            self.cases.sort_by(|a, b| {
                a.first_timestamp()
                    .cmp(&b.first_timestamp())
                    .then_with(|| a.case_id.cmp(&b.case_id))
            });
        }
    }
}

fn alphabet_of(cases: &[Case]) -> Vec<String> {
    let set: BTreeSet<&str> = cases
        .iter()
        .flat_map(|c| c.events.iter().map(|e| e.activity.as_str()))
        .collect();
    set.into_iter().map(str::to_string).collect()
}

fn validate_case(case: &Case, schema: &BTreeMap<String, AttrSpec>) -> Result<()> {
    if case.events.is_empty() {
        return Err(Error::EmptyCase(case.case_id.clone()));
    }
    let check = |name: &str, value: &AttrValue, scope: AttrScope| -> Result<()> {
        match schema.get(name) {
            Some(spec) if spec.scope == scope && spec.kind.accepts(value) => Ok(()),
            Some(spec) => Err(Error::InvalidConfig(format!(
                "value {value:?} of attribute `{name}` does not conform to {:?} {:?}",
                spec.scope, spec.kind
            ))),
            None => Err(Error::InvalidConfig(format!(
                "attribute `{name}` missing from schema"
            ))),
        }
    };
    for (name, value) in &case.static_attrs {
        check(name, value, AttrScope::Static)?;
    }
    let mut last_ts = None;
    for event in &case.events {
        if event.activity.trim().is_empty() {
            return Err(Error::EmptyActivity(case.case_id.clone()));
        }
        if let (Some(prev), Some(ts)) = (last_ts, event.timestamp) {
            if ts < prev {
                return Err(Error::InvalidConfig(format!(
                    "timestamps decrease within case `{}`",
                    case.case_id
                )));
            }
        }
        if event.timestamp.is_some() {
            last_ts = event.timestamp;
        }
        for (name, value) in &event.attrs {
            check(name, value, AttrScope::Dynamic)?;
        }
    }
    Ok(())
}

/// Splits the case list into contiguous parts sized by percentage. Each part
/// gets `floor(n * p / 100)` cases except the last, which takes the remainder.
pub fn split_log(log: &EventLog, fractions: &[f64]) -> Result<Vec<EventLog>> {
    let total: f64 = fractions.iter().sum();
    if fractions.is_empty() || fractions.iter().any(|f| *f < 0.0) || (total - 100.0).abs() > 1e-9 {
        return Err(Error::BadFractions(total));
    }
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let n = log.len();
    let mut sizes: Vec<usize> = fractions[..fractions.len() - 1]
        .iter()
        .map(|p| ((n as f64) * p / 100.0 + 1e-9).floor() as usize)
        .collect();
    let used: usize = sizes.iter().sum();
    sizes.push(n - used);

    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for size in sizes {
        out.push(log.sub_log(log.cases[start..start + size].to_vec()));
        start += size;
    }
    Ok(out)
}
