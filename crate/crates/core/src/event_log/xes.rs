//! Minimal XES reader.
//!
//! Understands `string`, `int`, `float`, `boolean`, `date` and `id` attributes on
//! traces and events. `<global>`, `<extension>` and `<classifier>` declarations
//! are skipped, as are nested (meta) attributes and `list`/`container` values.

use std::collections::BTreeMap;
use std::io::BufRead;

use chrono::DateTime;
use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::{AttrKind, AttrScope, AttrSpec, AttrValue, Case, Event, EventLog, RESERVED_NAMES};
use crate::error::{Error, Result};

const NAME_KEY: &str = "concept:name";
const TIME_KEY: &str = "time:timestamp";

#[derive(Default)]
struct TraceBuilder {
    name: Option<String>,
    attrs: BTreeMap<String, AttrValue>,
    events: Vec<Event>,
}

#[derive(Default)]
struct EventBuilder {
    name: Option<String>,
    timestamp: Option<i64>,
    attrs: BTreeMap<String, AttrValue>,
}

pub fn parse_xes<R: BufRead>(input: R) -> Result<EventLog> {
    let mut reader = Reader::from_reader(input);
    reader.config_mut().trim_text(true);

    let mut buf = Vec::new();
    let mut seen_log = false;
    let mut skip_depth = 0usize; // inside <global>, <list>, or a nested attribute
    let mut trace: Option<TraceBuilder> = None;
    let mut event: Option<EventBuilder> = None;
    let mut cases = Vec::new();
    let mut schema: BTreeMap<String, AttrSpec> = BTreeMap::new();

    loop {
        let xml = reader
            .read_event_into(&mut buf)
            .map_err(|e| Error::MalformedXes(format!("at byte {}: {e}", reader.buffer_position())))?;
        match xml {
            XmlEvent::Eof => break,
            XmlEvent::Start(el) => {
                let tag = tag_name(&el);
                if skip_depth > 0 {
                    skip_depth += 1;
                    continue;
                }
                match tag.as_str() {
                    "log" => seen_log = true,
                    "trace" if trace.is_none() => trace = Some(TraceBuilder::default()),
                    "event" if event.is_none() && trace.is_some() => {
                        event = Some(EventBuilder::default())
                    }
                    "trace" | "event" => {
                        return Err(Error::MalformedXes(format!("misplaced <{tag}>")))
                    }
                    _ => {
                        // An attribute with children, or a declaration block: keep its
                        // own value (if any) and skip whatever is nested inside it.
                        record_attribute(&el, &tag, &mut trace, &mut event, &mut schema)?;
                        skip_depth = 1;
                    }
                }
            }
            XmlEvent::Empty(el) => {
                if skip_depth > 0 {
                    continue;
                }
                let tag = tag_name(&el);
                match tag.as_str() {
                    "event" => {
                        let id = trace_label(&trace, cases.len());
                        return Err(Error::EventWithoutName(id));
                    }
                    "trace" => {
                        return Err(Error::EmptyCase(format!("trace_{}", cases.len())));
                    }
                    _ => record_attribute(&el, &tag, &mut trace, &mut event, &mut schema)?,
                }
            }
            XmlEvent::End(el) => {
                if skip_depth > 0 {
                    skip_depth -= 1;
                    continue;
                }
                match el.name().as_ref() {
                    b"event" => {
                        let Some(builder) = event.take() else {
                            return Err(Error::MalformedXes("stray </event>".into()));
                        };
                        let t = trace
                            .as_mut()
                            .ok_or_else(|| Error::MalformedXes("event outside trace".into()))?;
                        let activity = builder
                            .name
                            .map(|n| n.trim().to_string())
                            .filter(|n| !n.is_empty())
                            .ok_or_else(|| {
                                Error::EventWithoutName(
                                    t.name.clone().unwrap_or_else(|| format!("trace_{}", cases.len())),
                                )
                            })?;
                        t.events.push(Event {
                            activity,
                            timestamp: builder.timestamp,
                            attrs: builder.attrs,
                        });
                    }
                    b"trace" => {
                        let Some(mut t) = trace.take() else {
                            return Err(Error::MalformedXes("stray </trace>".into()));
                        };
                        if t.events.iter().all(|e| e.timestamp.is_some()) {
                            t.events.sort_by_key(|e| e.timestamp);
                        }
                        let case_id = t.name.unwrap_or_else(|| format!("trace_{}", cases.len()));
                        cases.push(Case {
                            case_id,
                            static_attrs: t.attrs,
                            events: t.events,
                        });
                    }
                    _ => {}
                }
            }
            _ => {}
        }
        buf.clear();
    }

    if !seen_log {
        return Err(Error::MalformedXes("missing <log> root element".into()));
    }
    if trace.is_some() || event.is_some() || skip_depth > 0 {
        return Err(Error::MalformedXes("unexpected end of document".into()));
    }
    EventLog::with_schema(cases, schema)
}

fn tag_name(el: &BytesStart<'_>) -> String {
    String::from_utf8_lossy(el.name().as_ref()).into_owned()
}

fn trace_label(trace: &Option<TraceBuilder>, index: usize) -> String {
    trace
        .as_ref()
        .and_then(|t| t.name.clone())
        .unwrap_or_else(|| format!("trace_{index}"))
}

fn record_attribute(
    el: &BytesStart<'_>,
    tag: &str,
    trace: &mut Option<TraceBuilder>,
    event: &mut Option<EventBuilder>,
    schema: &mut BTreeMap<String, AttrSpec>,
) -> Result<()> {
    let kind = match tag {
        "string" | "id" => AttrKind::String,
        "int" => AttrKind::Int,
        "float" => AttrKind::Float,
        "boolean" => AttrKind::Boolean,
        "date" => AttrKind::Date,
        // log-level declarations, lists and containers carry nothing we keep
        _ => return Ok(()),
    };
    let mut key = None;
    let mut raw = None;
    for attr in el.attributes() {
        let attr = attr.map_err(|e| Error::MalformedXes(e.to_string()))?;
        let value = attr
            .unescape_value()
            .map_err(|e| Error::MalformedXes(e.to_string()))?
            .into_owned();
        match attr.key.as_ref() {
            b"key" => key = Some(value),
            b"value" => raw = Some(value),
            _ => {}
        }
    }
    let key = key.ok_or_else(|| Error::MalformedXes(format!("<{tag}> without key")))?;
    let raw = raw.ok_or_else(|| Error::MalformedXes(format!("attribute `{key}` without value")))?;
    let value = match kind {
        AttrKind::String => AttrValue::Str(raw.clone()),
        AttrKind::Int => AttrValue::Num(
            raw.trim()
                .parse::<i64>()
                .map_err(|_| Error::MalformedXes(format!("bad int `{raw}` for `{key}`")))?
                as f64,
        ),
        AttrKind::Float => AttrValue::Num(
            raw.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::MalformedXes(format!("bad float `{raw}` for `{key}`")))?,
        ),
        AttrKind::Boolean => match raw.trim() {
            "true" => AttrValue::Bool(true),
            "false" => AttrValue::Bool(false),
            _ => return Err(Error::MalformedXes(format!("bad boolean `{raw}` for `{key}`"))),
        },
        AttrKind::Date => AttrValue::Num(
            DateTime::parse_from_rfc3339(raw.trim())
                .map_err(|_| Error::MalformedXes(format!("bad date `{raw}` for `{key}`")))?
                .timestamp_millis() as f64,
        ),
    };

    let (attrs, scope) = if let Some(ev) = event.as_mut() {
        if key == NAME_KEY {
            ev.name = Some(raw);
            return Ok(());
        }
        if key == TIME_KEY && kind == AttrKind::Date {
            if let AttrValue::Num(ms) = value {
                ev.timestamp = Some(ms as i64);
            }
            return Ok(());
        }
        (&mut ev.attrs, AttrScope::Dynamic)
    } else if let Some(tr) = trace.as_mut() {
        if key == NAME_KEY {
            tr.name = Some(raw);
            return Ok(());
        }
        (&mut tr.attrs, AttrScope::Static)
    } else {
        return Ok(());
    };

    if RESERVED_NAMES.contains(&key.as_str()) {
        return Err(Error::ReservedAttribute(key));
    }
    match schema.get_mut(&key) {
        None => {
            schema.insert(key.clone(), AttrSpec { kind, scope });
        }
        Some(spec) => {
            if spec.scope != scope {
                return Err(Error::InvalidConfig(format!(
                    "attribute `{key}` appears on both traces and events"
                )));
            }
            spec.kind = spec.kind.merge(kind).ok_or_else(|| Error::SchemaConflict {
                name: key.clone(),
                first: spec.kind,
                second: kind,
            })?;
        }
    }
    attrs.insert(key, value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<EventLog> {
        parse_xes(text.as_bytes())
    }

    #[test]
    fn one_trace_two_events() {
        let log = parse(
            r#"<?xml version="1.0" encoding="UTF-8"?>
            <log xes.version="1.0">
              <extension name="Concept" prefix="concept" uri="http://www.xes-standard.org/concept.xesext"/>
              <global scope="event"><string key="concept:name" value="__INVALID__"/></global>
              <trace>
                <string key="concept:name" value="t1"/>
                <int key="age" value="50"/>
                <event><string key="concept:name" value="A"/></event>
                <event><string key="concept:name" value="B"/></event>
              </trace>
            </log>"#,
        )
        .unwrap();
        assert_eq!(log.len(), 1);
        let case = &log.cases()[0];
        assert_eq!(case.case_id, "t1");
        assert_eq!(case.activities(), ["A", "B"]);
        assert_eq!(case.static_attr("age"), &AttrValue::Num(50.0));
        assert!(!log.attr_schema().contains_key("concept:name"));
    }

    #[test]
    fn event_without_name() {
        let err = parse(
            r#"<log><trace><string key="concept:name" value="t"/>
               <event><int key="x" value="1"/></event></trace></log>"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EventWithoutName(t) if t == "t"));
    }

    #[test]
    fn malformed_xml() {
        let err = parse("<log><trace><event></trace></log>").unwrap_err();
        assert!(matches!(err, Error::MalformedXes(_)), "{err:?}");
        assert!(matches!(parse("<log><trace>"), Err(Error::MalformedXes(_))));
    }

    #[test]
    fn nested_attributes_are_skipped() {
        let log = parse(
            r#"<log><trace><string key="concept:name" value="t"/>
               <string key="note" value="n"><int key="meta" value="3"/></string>
               <event><string key="concept:name" value="A"/>
                 <list key="items"><string key="i" value="x"/></list>
               </event></trace></log>"#,
        )
        .unwrap();
        let schema = log.attr_schema();
        assert!(schema.contains_key("note"));
        assert!(!schema.contains_key("meta"));
        assert!(!schema.contains_key("i"));
    }
}
