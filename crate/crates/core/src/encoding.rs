//! Case prefixes and their feature encodings.
//!
//! Two encodings are provided:
//!
//! * **frequency**: one count per activity of a fixed alphabet;
//! * **index**: for a fixed prefix length `m`, the static attributes, then the
//!   `m` activity labels, then each dynamic attribute at positions `1..=m`:
//!   `(s_1..s_u, event_1..event_m, h1_1..h1_m, .., hr_1..hr_m)`.
//!
//! Schemas are fixed at construction so a classifier's feature space never
//! changes while a stream is replayed. Activities missing from the schema's
//! alphabet are dropped by the frequency encoding and mapped to
//! [`UNKNOWN_ACTIVITY`] by the index encoding.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_log::{AttrKind, AttrScope, AttrValue, Case, Event, EventLog};

pub const UNKNOWN_ACTIVITY: &str = "<unknown>";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

impl From<AttrKind> for FeatureKind {
    fn from(kind: AttrKind) -> Self {
        if kind.is_numeric() {
            FeatureKind::Numeric
        } else {
            FeatureKind::Categorical
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureValue {
    Numeric(f64),
    Categorical(String),
    Absent,
}

impl FeatureValue {
    pub fn from_attr(value: &AttrValue, kind: FeatureKind) -> Self {
        match (value, kind) {
            (AttrValue::Absent, _) => FeatureValue::Absent,
            (AttrValue::Num(v), FeatureKind::Numeric) => FeatureValue::Numeric(*v),
            (AttrValue::Str(s), FeatureKind::Categorical) => FeatureValue::Categorical(s.clone()),
            (AttrValue::Bool(b), FeatureKind::Categorical) => FeatureValue::Categorical(b.to_string()),
            (AttrValue::Num(v), FeatureKind::Categorical) => FeatureValue::Categorical(v.to_string()),
            _ => FeatureValue::Absent,
        }
    }

    pub fn as_numeric(&self) -> Option<f64> {
        match self {
            FeatureValue::Numeric(v) => Some(*v),
            _ => None,
        }
    }
}

/// Ordered feature names and kinds; `id` is a stable hash of both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
    kinds: Vec<FeatureKind>,
    id: u64,
}

impl FeatureSchema {
    pub fn new(tag: &str, features: Vec<(String, FeatureKind)>) -> Self {
        // FNV-1a, stable across builds and platforms.
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                hash ^= u64::from(*b);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
            hash ^= 0xff;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        };
        feed(tag.as_bytes());
        for (name, kind) in &features {
            feed(name.as_bytes());
            feed(match kind {
                FeatureKind::Numeric => b"n",
                FeatureKind::Categorical => b"c",
            });
        }
        let (names, kinds) = features.into_iter().unzip();
        FeatureSchema { names, kinds, id: hash }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn check(&self, x: &FeatureVector) -> Result<()> {
        if x.schema_id != self.id || x.values.len() != self.names.len() {
            return Err(Error::SchemaMismatch {
                expected: self.id,
                got: x.schema_id,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<FeatureValue>,
    pub schema_id: u64,
}

impl FeatureVector {
    /// Numeric view for distance computations; non-numeric entries count as 0.
    pub fn numeric(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v.as_numeric().unwrap_or(0.0))
            .collect()
    }
}

/// The first `length` events of a case. `label` is the outcome of the whole
/// case when known (training), whatever the prefix length.
#[derive(Clone, Copy, Debug)]
pub struct Prefix<'a> {
    pub case: &'a Case,
    pub length: usize,
    pub label: Option<bool>,
}

impl<'a> Prefix<'a> {
    pub fn new(case: &'a Case, length: usize, label: Option<bool>) -> Self {
        assert!(length <= case.len(), "prefix longer than its case");
        Prefix { case, length, label }
    }

    pub fn case_id(&self) -> &'a str {
        &self.case.case_id
    }

    pub fn events(&self) -> &'a [Event] {
        &self.case.events[..self.length]
    }

    pub fn last_event(&self) -> Option<&'a Event> {
        self.events().last()
    }
}

/// One prefix per length in `[min_len, min(max_len, |case|)]`.
pub fn extract_prefixes(case: &Case, label: Option<bool>, min_len: usize, max_len: usize) -> Vec<Prefix<'_>> {
    let min_len = min_len.max(1);
    let upper = max_len.min(case.len());
    (min_len..=upper)
        .map(|len| Prefix::new(case, len, label))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncodingKind {
    Frequency,
    Index { prefix_len: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingSchema {
    kind: EncodingKind,
    activity_alphabet: Vec<String>,
    static_attrs: Vec<(String, FeatureKind)>,
    dynamic_attrs: Vec<(String, FeatureKind)>,
    features: FeatureSchema,
}

impl EncodingSchema {
    pub fn frequency(activity_alphabet: Vec<String>) -> Self {
        let features = FeatureSchema::new(
            "frequency",
            activity_alphabet
                .iter()
                .map(|a| (format!("count:{a}"), FeatureKind::Numeric))
                .collect(),
        );
        EncodingSchema {
            kind: EncodingKind::Frequency,
            activity_alphabet,
            static_attrs: Vec::new(),
            dynamic_attrs: Vec::new(),
            features,
        }
    }

    pub fn index(
        activity_alphabet: Vec<String>,
        static_attrs: Vec<(String, FeatureKind)>,
        dynamic_attrs: Vec<(String, FeatureKind)>,
        prefix_len: usize,
    ) -> Self {
        let mut layout: Vec<(String, FeatureKind)> = static_attrs.clone();
        layout.extend((1..=prefix_len).map(|j| (format!("event_{j}"), FeatureKind::Categorical)));
        for (name, kind) in &dynamic_attrs {
            layout.extend((1..=prefix_len).map(|j| (format!("{name}_{j}"), *kind)));
        }
        EncodingSchema {
            kind: EncodingKind::Index { prefix_len },
            activity_alphabet,
            static_attrs,
            dynamic_attrs,
            features: FeatureSchema::new(&format!("index:{prefix_len}"), layout),
        }
    }

    /// Index schema for length `m` over the log's alphabet and attributes.
    pub fn index_for_log(log: &EventLog, prefix_len: usize) -> Self {
        Self::index(
            log.activity_alphabet().to_vec(),
            attr_features(log, AttrScope::Static),
            attr_features(log, AttrScope::Dynamic),
            prefix_len,
        )
    }

    pub fn kind(&self) -> EncodingKind {
        self.kind
    }

    pub fn activity_alphabet(&self) -> &[String] {
        &self.activity_alphabet
    }

    pub fn features(&self) -> &FeatureSchema {
        &self.features
    }

    pub fn static_attrs(&self) -> &[(String, FeatureKind)] {
        &self.static_attrs
    }

    pub fn dynamic_attrs(&self) -> &[(String, FeatureKind)] {
        &self.dynamic_attrs
    }
}

pub fn attr_features(log: &EventLog, scope: AttrScope) -> Vec<(String, FeatureKind)> {
    log.attr_names(scope)
        .into_iter()
        .map(|(name, kind)| (name, kind.into()))
        .collect()
}

pub fn encode_frequency(prefix: &Prefix<'_>, schema: &EncodingSchema) -> Result<FeatureVector> {
    if schema.kind != EncodingKind::Frequency {
        return Err(Error::WrongEncoding("index"));
    }
    let mut counts = vec![0.0; schema.activity_alphabet.len()];
    for event in prefix.events() {
        let label = event.activity.as_str();
        if let Ok(k) = schema
            .activity_alphabet
            .binary_search_by(|a| a.as_str().cmp(label))
        {
            counts[k] += 1.0;
        } else if let Some(k) = schema.activity_alphabet.iter().position(|a| a == label) {
            // unsorted alphabets still work, just slower
            counts[k] += 1.0;
        }
    }
    Ok(FeatureVector {
        values: counts.into_iter().map(FeatureValue::Numeric).collect(),
        schema_id: schema.features.id(),
    })
}

pub fn encode_index(prefix: &Prefix<'_>, schema: &EncodingSchema) -> Result<FeatureVector> {
    let EncodingKind::Index { prefix_len } = schema.kind else {
        return Err(Error::WrongEncoding("frequency"));
    };
    if prefix.length != prefix_len {
        return Err(Error::PrefixLength {
            expected: prefix_len,
            got: prefix.length,
        });
    }
    let events = prefix.events();
    let mut values = Vec::with_capacity(schema.features.len());
    for (name, kind) in &schema.static_attrs {
        values.push(FeatureValue::from_attr(prefix.case.static_attr(name), *kind));
    }
    for event in events {
        let known = schema.activity_alphabet.contains(&event.activity);
        values.push(FeatureValue::Categorical(if known {
            event.activity.clone()
        } else {
            UNKNOWN_ACTIVITY.to_string()
        }));
    }
    for (name, kind) in &schema.dynamic_attrs {
        for event in events {
            values.push(FeatureValue::from_attr(event.attr(name), *kind));
        }
    }
    Ok(FeatureVector {
        values,
        schema_id: schema.features.id(),
    })
}

/// Writes encoded rows as CSV (`label` last, empty when unknown) and the
/// schema sidecar as JSON (`[{"name": .., "kind": ..}, ..]`).
pub fn write_dataset<W: Write, S: Write>(
    schema: &FeatureSchema,
    rows: &[(FeatureVector, Option<bool>)],
    data: W,
    sidecar: S,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(data);
    let mut header: Vec<&str> = schema.names().iter().map(String::as_str).collect();
    header.push("label");
    writer.write_record(&header)?;
    for (x, y) in rows {
        schema.check(x)?;
        let mut record: Vec<String> = x
            .values
            .iter()
            .map(|v| match v {
                FeatureValue::Numeric(n) => format!("{n:?}"),
                FeatureValue::Categorical(s) => s.clone(),
                FeatureValue::Absent => String::new(),
            })
            .collect();
        record.push(y.map(|b| b.to_string()).unwrap_or_default());
        writer.write_record(&record)?;
    }
    writer.flush()?;

    #[derive(Serialize)]
    struct Column<'a> {
        name: &'a str,
        kind: FeatureKind,
    }
    let columns: Vec<Column<'_>> = schema
        .names()
        .iter()
        .zip(schema.kinds())
        .map(|(name, kind)| Column { name, kind: *kind })
        .collect();
    serde_json::to_writer_pretty(sidecar, &columns)?;
    Ok(())
}
