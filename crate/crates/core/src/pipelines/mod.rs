//! End-to-end outcome predictors.
//!
//! * [`ClusteringPipeline`]: prefixes are clustered on their activity counts
//!   and each canopy owns a classifier over the prefix's data payload.
//! * [`IndexPipeline`]: one classifier per prefix length over the index
//!   encoding of that length.
//!
//! Both train on completed cases, predict on prefixes, and (with incremental
//! classifiers) absorb each newly completed case with `update`.

mod clustering;
mod index;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierConfig, ClassifierKind, Score};
use crate::encoding::{attr_features, FeatureKind, FeatureSchema, FeatureValue, FeatureVector, Prefix};
use crate::error::{Error, Result};
use crate::event_log::{AttrScope, Case, EventLog};
use crate::ltl::{label_case, Formula};
use crate::persist;

pub use clustering::ClusteringPipeline;
pub use index::IndexPipeline;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Clustering,
    Index,
}

impl Approach {
    pub fn name(self) -> &'static str {
        match self {
            Approach::Clustering => "clustering",
            Approach::Index => "index",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clustering" | "cluster" => Ok(Approach::Clustering),
            "index" => Ok(Approach::Index),
            other => Err(Error::InvalidConfig(format!("unknown approach `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub approach: Approach,
    pub classifier: ClassifierConfig,
    pub prefix_min: usize,
    pub prefix_max: usize,
    /// Canopy thresholds; derived from the training prefixes when unset.
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            approach: Approach::Clustering,
            classifier: ClassifierConfig::default(),
            prefix_min: 1,
            prefix_max: 20,
            t1: None,
            t2: None,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn new(approach: Approach, classifier: ClassifierKind) -> Self {
        PipelineConfig {
            approach,
            classifier: ClassifierConfig::with_kind(classifier),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.prefix_min == 0 || self.prefix_min > self.prefix_max {
            return Err(Error::InvalidConfig(format!(
                "prefix range [{}, {}] is empty or starts at 0",
                self.prefix_min, self.prefix_max
            )));
        }
        if self.t1.is_some() != self.t2.is_some() {
            return Err(Error::InvalidConfig("t1 and t2 must be given together".into()));
        }
        self.classifier.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub case_id: String,
    pub prefix_len: usize,
    pub label: bool,
    pub score: f64,
    /// Set when no trained classifier covered the prefix and the global
    /// training majority was returned instead.
    pub fallback: bool,
}

impl Prediction {
    fn scored(prefix: &Prefix<'_>, score: Score) -> Self {
        Prediction {
            case_id: prefix.case_id().to_string(),
            prefix_len: prefix.length,
            label: score.label,
            score: score.score,
            fallback: false,
        }
    }

    fn fallback(prefix: &Prefix<'_>, majority: bool) -> Self {
        Prediction {
            case_id: prefix.case_id().to_string(),
            prefix_len: prefix.length,
            label: majority,
            score: 0.5,
            fallback: true,
        }
    }
}

/// Data payload seen by the clustering pipeline's classifiers: static
/// attributes, then the dynamic attributes of the prefix's latest event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayloadSchema {
    static_attrs: Vec<(String, FeatureKind)>,
    dynamic_attrs: Vec<(String, FeatureKind)>,
    features: FeatureSchema,
}

impl PayloadSchema {
    pub fn for_log(log: &EventLog) -> Self {
        let static_attrs = attr_features(log, AttrScope::Static);
        let dynamic_attrs = attr_features(log, AttrScope::Dynamic);
        let mut layout = static_attrs.clone();
        layout.extend(dynamic_attrs.iter().map(|(n, k)| (format!("last:{n}"), *k)));
        PayloadSchema {
            static_attrs,
            dynamic_attrs,
            features: FeatureSchema::new("payload", layout),
        }
    }

    pub fn features(&self) -> &FeatureSchema {
        &self.features
    }

    pub fn encode(&self, prefix: &Prefix<'_>) -> FeatureVector {
        let mut values = Vec::with_capacity(self.features.len());
        for (name, kind) in &self.static_attrs {
            values.push(FeatureValue::from_attr(prefix.case.static_attr(name), *kind));
        }
        let last = prefix.last_event();
        for (name, kind) in &self.dynamic_attrs {
            values.push(last.map_or(FeatureValue::Absent, |e| FeatureValue::from_attr(e.attr(name), *kind)));
        }
        FeatureVector {
            values,
            schema_id: self.features.id(),
        }
    }
}

/// Outcome of every case, in log order.
fn case_labels(log: &EventLog, formula: &Formula) -> Result<Vec<bool>> {
    log.cases().iter().map(|c| label_case(c, formula)).collect()
}

/// Majority label; ties go to `false`.
fn majority(labels: &[bool]) -> bool {
    labels.iter().filter(|y| **y).count() * 2 > labels.len()
}

fn check_log(log: &EventLog, labels: &[bool]) -> Result<()> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    if labels.iter().all(|y| *y) || labels.iter().all(|y| !*y) {
        log::warn!("every training case has the same outcome; the model can only predict that outcome");
    }
    Ok(())
}

/// Either pipeline behind one interface.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Pipeline {
    Clustering(ClusteringPipeline),
    Index(IndexPipeline),
}

impl Pipeline {
    pub fn train(log: &EventLog, formula: &Formula, config: &PipelineConfig) -> Result<Self> {
        Ok(match config.approach {
            Approach::Clustering => Pipeline::Clustering(ClusteringPipeline::train(log, formula, config)?),
            Approach::Index => Pipeline::Index(IndexPipeline::train(log, formula, config)?),
        })
    }

    pub fn predict(&self, prefix: &Prefix<'_>) -> Result<Prediction> {
        match self {
            Pipeline::Clustering(p) => p.predict(prefix),
            Pipeline::Index(p) => p.predict(prefix),
        }
    }

    pub fn update(&mut self, case: &Case) -> Result<()> {
        match self {
            Pipeline::Clustering(p) => p.update(case),
            Pipeline::Index(p) => p.update(case),
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        match self {
            Pipeline::Clustering(p) => p.config(),
            Pipeline::Index(p) => p.config(),
        }
    }

    pub fn formula(&self) -> &Formula {
        match self {
            Pipeline::Clustering(p) => p.formula(),
            Pipeline::Index(p) => p.formula(),
        }
    }

    /// `learn_one` calls made by incremental training and updates so far.
    pub fn learn_calls(&self) -> u64 {
        match self {
            Pipeline::Clustering(p) => p.learn_calls(),
            Pipeline::Index(p) => p.learn_calls(),
        }
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        persist::save("pipeline", self, out)
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        persist::load("pipeline", input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::{AttrValue, Event};

    #[test]
    fn payload_uses_latest_event() {
        let case = Case::new(
            "c",
            vec![
                Event::new("A").with_attr("r", AttrValue::Str("x".into())),
                Event::new("B").with_attr("r", AttrValue::Str("y".into())),
            ],
        )
        .with_static("age", AttrValue::Num(40.0));
        let log = EventLog::from_cases(vec![case]).unwrap();
        let payload = PayloadSchema::for_log(&log);
        assert_eq!(payload.features().names(), ["age", "last:r"]);
        let case = &log.cases()[0];
        let one = payload.encode(&Prefix::new(case, 1, None));
        let two = payload.encode(&Prefix::new(case, 2, None));
        assert_eq!(one.values[1], FeatureValue::Categorical("x".into()));
        assert_eq!(two.values[1], FeatureValue::Categorical("y".into()));
        assert_eq!(two.values[0], FeatureValue::Numeric(40.0));
    }

    #[test]
    fn config_checks() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.prefix_min = 0;
        assert!(cfg.validate().is_err());
        cfg.prefix_min = 3;
        cfg.prefix_max = 2;
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig {
            t1: Some(2.0),
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!("index".parse::<Approach>().unwrap(), Approach::Index);
    }
}
