//! Linear temporal logic over finite traces, used to label completed cases.
//!
//! Semantics are the usual finite-trace reading evaluated at position 0:
//! `F f` holds at `i` iff `f` holds at some `j >= i`, `G f` iff at every
//! `j >= i`, and `f U g` iff `g` holds at some `j >= i` with `f` at every
//! position in `i..j`. There is no next operator.

mod parser;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_log::{Case, EventLog};

pub use parser::parse_formula;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formula {
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(label: impl Into<String>) -> Self {
        Formula::Atom(label.into().trim().to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn eventually(f: Formula) -> Self {
        Formula::Eventually(Box::new(f))
    }

    pub fn always(f: Formula) -> Self {
        Formula::Always(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Self {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::Not(f) | Formula::Eventually(f) | Formula::Always(f) => 1 + f.depth(),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Until(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Truth value at position 0 of a non-empty trace.
    pub fn evaluate<S: AsRef<str>>(&self, trace: &[S]) -> Result<bool> {
        if trace.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let trimmed: Vec<&str> = trace.iter().map(|s| s.as_ref().trim()).collect();
        Ok(self.truth(&trimmed)[0])
    }

    /// Truth value at every position, computed backwards in one pass per node.
    fn truth(&self, trace: &[&str]) -> Vec<bool> {
        let n = trace.len();
        match self {
            Formula::Atom(a) => trace.iter().map(|t| *t == a.trim()).collect(),
            Formula::Not(f) => f.truth(trace).into_iter().map(|v| !v).collect(),
            Formula::And(a, b) => zip_with(a.truth(trace), b.truth(trace), |x, y| x && y),
            Formula::Or(a, b) => zip_with(a.truth(trace), b.truth(trace), |x, y| x || y),
            Formula::Implies(a, b) => zip_with(a.truth(trace), b.truth(trace), |x, y| !x || y),
            Formula::Eventually(f) => {
                let mut v = f.truth(trace);
                for i in (0..n.saturating_sub(1)).rev() {
                    v[i] = v[i] || v[i + 1];
                }
                v
            }
            Formula::Always(f) => {
                let mut v = f.truth(trace);
                for i in (0..n.saturating_sub(1)).rev() {
                    v[i] = v[i] && v[i + 1];
                }
                v
            }
            Formula::Until(a, b) => {
                let lhs = a.truth(trace);
                let mut v = b.truth(trace);
                let mut next = false;
                for i in (0..n).rev() {
                    v[i] = v[i] || (lhs[i] && next);
                    next = v[i];
                }
                v
            }
        }
    }
}

fn zip_with(a: Vec<bool>, b: Vec<bool>, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}

/// Fully parenthesised rendering that `parse_formula` reads back.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(a) => write!(f, "\"{}\"", a.replace('\\', "\\\\").replace('"', "\\\"")),
            Formula::Not(x) => write!(f, "!({x})"),
            Formula::Eventually(x) => write!(f, "F({x})"),
            Formula::Always(x) => write!(f, "G({x})"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
            Formula::Until(a, b) => write!(f, "({a} U {b})"),
        }
    }
}

pub fn label_case(case: &Case, formula: &Formula) -> Result<bool> {
    if case.events.is_empty() {
        return Err(Error::EmptyCase(case.case_id.clone()));
    }
    formula.evaluate(&case.activities())
}

/// Outcome of every case in the log, keyed by case id.
pub fn label_log(log: &EventLog, formula: &Formula) -> Result<BTreeMap<String, bool>> {
    log.cases()
        .iter()
        .map(|c| Ok((c.case_id.clone(), label_case(c, formula)?)))
        .collect()
}

/// Writes `case_id,label` rows in log order.
pub fn write_labels<W: Write>(log: &EventLog, formula: &Formula, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["case_id", "label"])?;
    for case in log.cases() {
        let label = label_case(case, formula)?;
        writer.write_record([case.case_id.as_str(), if label { "true" } else { "false" }])?;
    }
    writer.flush()?;
    Ok(())
}
