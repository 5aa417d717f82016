//! Flat CSV event logs: one row per event, RFC 4180 quoting, mandatory header.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};

use super::{AttrKind, AttrScope, AttrSpec, AttrValue, Case, Event, EventLog, RESERVED_NAMES};
use crate::error::{Error, Result};

/// How non-mandatory columns are split between case and event attributes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StaticColumns {
    /// Exactly these columns are static; a listed column varying inside a case is an error.
    Listed(Vec<String>),
    /// Columns whose non-empty values are constant inside every case become static.
    Infer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvSchemaConfig {
    pub case_column: String,
    pub activity_column: String,
    pub timestamp_column: Option<String>,
    pub static_columns: StaticColumns,
}

impl Default for CsvSchemaConfig {
    fn default() -> Self {
        CsvSchemaConfig {
            case_column: "case_id".into(),
            activity_column: "activity".into(),
            timestamp_column: Some("timestamp".into()),
            static_columns: StaticColumns::Infer,
        }
    }
}

struct Row {
    activity: String,
    timestamp: Option<i64>,
    values: Vec<Option<String>>,
}

pub fn parse_csv<R: Read>(input: R, config: &CsvSchemaConfig) -> Result<EventLog> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let case_idx = find(&config.case_column)?;
    let activity_idx = find(&config.activity_column)?;
    let ts_idx = config.timestamp_column.as_deref().map(find).transpose()?;

    let attr_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != case_idx && *i != activity_idx && Some(*i) != ts_idx)
        .map(|(i, h)| (i, h.to_string()))
        .collect();
    for (_, name) in &attr_cols {
        if RESERVED_NAMES.contains(&name.as_str()) {
            return Err(Error::ReservedAttribute(name.clone()));
        }
    }
    if let StaticColumns::Listed(names) = &config.static_columns {
        for name in names {
            if !attr_cols.iter().any(|(_, h)| h == name) {
                return Err(Error::MissingColumn(name.clone()));
            }
        }
    }

    // Group rows by case id, keeping first-appearance order.
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Row>> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let case_id = record.get(case_idx).unwrap_or_default().to_string();
        let activity = record.get(activity_idx).unwrap_or_default().trim().to_string();
        if activity.is_empty() {
            return Err(Error::EmptyActivity(case_id));
        }
        let timestamp = match ts_idx.and_then(|i| record.get(i)) {
            Some(raw) if !raw.trim().is_empty() => {
                Some(parse_timestamp(raw.trim()).ok_or_else(|| Error::BadTimestamp {
                    value: raw.to_string(),
                    case_id: case_id.clone(),
                })?)
            }
            _ => None,
        };
        let values = attr_cols
            .iter()
            .map(|(i, _)| record.get(*i).filter(|v| !v.is_empty()).map(str::to_string))
            .collect();
        let row = Row {
            activity,
            timestamp,
            values,
        };
        match groups.get_mut(&case_id) {
            Some(rows) => rows.push(row),
            None => {
                order.push(case_id.clone());
                groups.insert(case_id, vec![row]);
            }
        }
    }

    let kinds: Vec<AttrKind> = (0..attr_cols.len())
        .map(|col| {
            infer_kind(
                groups
                    .values()
                    .flat_map(|rows| rows.iter().filter_map(move |r| r.values[col].as_deref())),
            )
        })
        .collect();

    let is_static: Vec<bool> = attr_cols
        .iter()
        .enumerate()
        .map(|(col, (_, name))| -> Result<bool> {
            let constant = |rows: &Vec<Row>| {
                let mut present = rows.iter().filter_map(|r| r.values[col].as_deref());
                match present.next() {
                    Some(first) => present.all(|v| v == first),
                    None => true,
                }
            };
            match &config.static_columns {
                StaticColumns::Listed(names) if names.contains(name) => {
                    for id in &order {
                        if !constant(&groups[id]) {
                            return Err(Error::StaticColumnVaries {
                                column: name.clone(),
                                case_id: id.clone(),
                            });
                        }
                    }
                    Ok(true)
                }
                StaticColumns::Listed(_) => Ok(false),
                StaticColumns::Infer => Ok(!order.is_empty()
                    && order.iter().all(|id| constant(&groups[id]))),
            }
        })
        .collect::<Result<_>>()?;

    let schema: BTreeMap<String, AttrSpec> = attr_cols
        .iter()
        .enumerate()
        .map(|(col, (_, name))| {
            let scope = if is_static[col] {
                AttrScope::Static
            } else {
                AttrScope::Dynamic
            };
            (
                name.clone(),
                AttrSpec {
                    kind: kinds[col],
                    scope,
                },
            )
        })
        .collect();

    let mut cases = Vec::with_capacity(order.len());
    for id in order {
        let mut rows = groups.remove(&id).unwrap_or_default();
        if rows.iter().all(|r| r.timestamp.is_some()) {
            rows.sort_by_key(|r| r.timestamp);
        }
        let mut static_attrs = BTreeMap::new();
        for (col, (_, name)) in attr_cols.iter().enumerate() {
            if is_static[col] {
                let raw = rows.iter().find_map(|r| r.values[col].as_deref());
                static_attrs.insert(name.clone(), convert(raw, kinds[col]));
            }
        }
        let events = rows
            .iter()
            .map(|r| {
                let attrs = attr_cols
                    .iter()
                    .enumerate()
                    .filter(|(col, _)| !is_static[*col])
                    .map(|(col, (_, name))| (name.clone(), convert(r.values[col].as_deref(), kinds[col])))
                    .collect();
                Event {
                    activity: r.activity.clone(),
                    timestamp: r.timestamp,
                    attrs,
                }
            })
            .collect();
        cases.push(Case {
            case_id: id,
            static_attrs,
            events,
        });
    }
    EventLog::with_schema(cases, schema)
}

/// Writes the log in the layout `parse_csv` reads with the default config:
/// `case_id,activity,timestamp`, then static columns, then dynamic columns.
pub fn write_csv<W: Write>(log: &EventLog, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let has_ts = log
        .cases()
        .iter()
        .any(|c| c.events.iter().any(|e| e.timestamp.is_some()));
    let statics = log.attr_names(AttrScope::Static);
    let dynamics = log.attr_names(AttrScope::Dynamic);

    let mut header = vec!["case_id".to_string(), "activity".to_string()];
    if has_ts {
        header.push("timestamp".to_string());
    }
    header.extend(statics.iter().map(|(n, _)| n.clone()));
    header.extend(dynamics.iter().map(|(n, _)| n.clone()));
    writer.write_record(&header)?;

    for case in log.cases() {
        for event in &case.events {
            let mut row = vec![case.case_id.clone(), event.activity.clone()];
            if has_ts {
                row.push(event.timestamp.map(format_timestamp).unwrap_or_default());
            }
            for (name, kind) in &statics {
                row.push(render(case.static_attr(name), *kind));
            }
            for (name, kind) in &dynamics {
                row.push(render(event.attr(name), *kind));
            }
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn infer_kind<'a>(values: impl Iterator<Item = &'a str>) -> AttrKind {
    let mut kind: Option<AttrKind> = None;
    for v in values {
        let this = if v == "true" || v == "false" {
            AttrKind::Boolean
        } else if v.parse::<i64>().is_ok() {
            AttrKind::Int
        } else if v.parse::<f64>().map(f64::is_finite).unwrap_or(false) {
            AttrKind::Float
        } else {
            return AttrKind::String;
        };
        kind = match (kind, this) {
            (None, k) => Some(k),
            (Some(a), b) if a == b => Some(a),
            (Some(AttrKind::Int), AttrKind::Float) | (Some(AttrKind::Float), AttrKind::Int) => {
                Some(AttrKind::Float)
            }
            _ => return AttrKind::String,
        };
    }
    kind.unwrap_or(AttrKind::String)
}

fn convert(raw: Option<&str>, kind: AttrKind) -> AttrValue {
    match raw {
        None => AttrValue::Absent,
        Some(v) => match kind {
            AttrKind::Boolean => AttrValue::Bool(v == "true"),
            AttrKind::Int | AttrKind::Float | AttrKind::Date => {
                v.parse().map(AttrValue::Num).unwrap_or(AttrValue::Absent)
            }
            AttrKind::String => AttrValue::Str(v.to_string()),
        },
    }
}

fn render(value: &AttrValue, kind: AttrKind) -> String {
    match value {
        AttrValue::Absent => String::new(),
        AttrValue::Str(s) => s.clone(),
        AttrValue::Bool(b) => b.to_string(),
        AttrValue::Num(v) if kind == AttrKind::Int => format!("{}", *v as i64),
        AttrValue::Num(v) => format!("{v:?}"),
    }
}

pub(crate) fn parse_timestamp(raw: &str) -> Option<i64> {
    if let Ok(ms) = raw.parse::<i64>() {
        return Some(ms);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp_millis());
    }
    const NAIVE: [&str; 4] = [
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y/%m/%d %H:%M:%S%.f",
        "%d-%m-%Y %H:%M:%S%.f",
    ];
    for fmt in NAIVE {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(dt.and_utc().timestamp_millis());
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp_millis())
}

pub(crate) fn format_timestamp(ms: i64) -> String {
    DateTime::<Utc>::from_timestamp_millis(ms)
        .map(|dt| dt.to_rfc3339_opts(SecondsFormat::Millis, true))
        .unwrap_or_else(|| ms.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<EventLog> {
        parse_csv(text.as_bytes(), &CsvSchemaConfig::default())
    }

    #[test]
    fn groups_rows_into_cases() {
        let log = parse(
            "case_id,activity,timestamp\n\
             c1,A,2020-01-01T00:00:00Z\n\
             c1,B,2020-01-01T00:01:00Z\n\
             c2,A,2020-01-02T00:00:00Z\n",
        )
        .unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log.activity_alphabet(), ["A", "B"]);
        assert_eq!(log.cases()[0].activities(), ["A", "B"]);
    }

    #[test]
    fn header_only_is_empty_log() {
        let log = parse("case_id,activity,timestamp\n").unwrap();
        assert!(log.is_empty());
    }

    #[test]
    fn missing_column() {
        let err = parse("case,activity\nc1,A\n").unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "case_id"));
    }

    #[test]
    fn bad_timestamp() {
        let err = parse("case_id,activity,timestamp\nc1,A,yesterday\n").unwrap_err();
        assert!(matches!(err, Error::BadTimestamp { .. }));
    }

    #[test]
    fn listed_static_column_must_be_constant() {
        let config = CsvSchemaConfig {
            static_columns: StaticColumns::Listed(vec!["age".into()]),
            ..CsvSchemaConfig::default()
        };
        let text = "case_id,activity,timestamp,age\nc1,A,1,50\nc1,B,2,51\n";
        let err = parse_csv(text.as_bytes(), &config).unwrap_err();
        assert!(matches!(err, Error::StaticColumnVaries { .. }));
    }

    #[test]
    fn infers_static_and_dynamic() {
        let text = "case_id,activity,timestamp,age,amount,vip\n\
                    c1,A,1,50,100,true\n\
                    c1,B,2,50,200.5,true\n\
                    c2,A,3,,7,false\n";
        let log = parse(text).unwrap();
        let schema = log.attr_schema();
        assert_eq!(schema["age"].scope, AttrScope::Static);
        assert_eq!(schema["age"].kind, AttrKind::Int);
        assert_eq!(schema["amount"].scope, AttrScope::Dynamic);
        assert_eq!(schema["amount"].kind, AttrKind::Float);
        assert_eq!(schema["vip"].kind, AttrKind::Boolean);
        let c1 = &log.cases()[0];
        assert_eq!(c1.static_attr("age"), &AttrValue::Num(50.0));
        assert_eq!(c1.events[1].attr("amount"), &AttrValue::Num(200.5));
        assert_eq!(log.cases()[1].static_attr("age"), &AttrValue::Absent);
    }

    #[test]
    fn quoted_fields() {
        let text = "case_id,activity,timestamp\n\"c,1\",\"Accept \"\"big\"\" claim\",5\n";
        let log = parse(text).unwrap();
        assert_eq!(log.cases()[0].case_id, "c,1");
        assert_eq!(log.cases()[0].events[0].activity, "Accept \"big\" claim");
    }

    #[test]
    fn timestamp_formats() {
        assert_eq!(parse_timestamp("1500"), Some(1500));
        assert_eq!(parse_timestamp("1970-01-01T00:00:01.5Z"), Some(1500));
        assert_eq!(parse_timestamp("1970-01-01 00:00:02"), Some(2000));
        assert_eq!(parse_timestamp("1970-01-02"), Some(86_400_000));
        assert_eq!(format_timestamp(1500), "1970-01-01T00:00:01.500Z");
    }
}
