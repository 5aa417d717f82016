//! Binary classifiers over [`FeatureVector`]s: two incremental trees and an
//! offline random forest behind one [`Classifier`] type.

pub mod adaptive;
pub mod adwin;
pub mod forest;
pub mod hoeffding;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoding::{FeatureSchema, FeatureVector};
use crate::error::{Error, Result};

pub use adaptive::AdaptiveHoeffdingTree;
pub use adwin::Adwin;
pub use forest::{CartTree, ForestConfig, RandomForest};
pub use hoeffding::{hoeffding_bound, HoeffdingConfig, HoeffdingTree};

/// Predicted label and positive-class score in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub label: bool,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Ht,
    Aht,
    Rf,
}

impl ClassifierKind {
    pub fn is_incremental(self) -> bool {
        !matches!(self, ClassifierKind::Rf)
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Ht => "ht",
            ClassifierKind::Aht => "aht",
            ClassifierKind::Rf => "rf",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ht" => Ok(ClassifierKind::Ht),
            "aht" | "at" => Ok(ClassifierKind::Aht),
            "rf" => Ok(ClassifierKind::Rf),
            other => Err(Error::InvalidConfig(format!("unknown classifier `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub hoeffding: HoeffdingConfig,
    pub adwin_delta: f64,
    /// Adaptive trees only; off makes them grow like plain Hoeffding trees.
    pub monitors: bool,
    pub forest: ForestConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            kind: ClassifierKind::Ht,
            hoeffding: HoeffdingConfig::default(),
            adwin_delta: adwin::DEFAULT_DELTA,
            monitors: true,
            forest: ForestConfig::default(),
        }
    }
}

impl ClassifierConfig {
    pub fn with_kind(kind: ClassifierKind) -> Self {
        ClassifierConfig {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.hoeffding;
        let ok = h.delta > 0.0
            && h.delta < 1.0
            && h.tau >= 0.0
            && h.grace_period > 0
            && h.bins >= 2
            && self.adwin_delta > 0.0
            && self.adwin_delta < 1.0
            && self.forest.n_trees > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("classifier hyperparameters out of range: {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    Ht(HoeffdingTree),
    Aht(AdaptiveHoeffdingTree),
    Rf(RandomForest),
}

impl Classifier {
    /// Trains a classifier of the configured kind. Incremental kinds learn
    /// the rows in order; the forest is fit in one batch with `seed`.
    pub fn fit(config: &ClassifierConfig, schema: &FeatureSchema, data: &[(FeatureVector, bool)], seed: u64) -> Result<Self> {
        match config.kind {
            ClassifierKind::Rf => {
                let forest = ForestConfig {
                    seed,
                    ..config.forest
                };
                Ok(Classifier::Rf(RandomForest::fit(schema.clone(), data, forest)?))
            }
            _ => {
                let mut c = Self::incremental(config, schema)?;
                for (x, y) in data {
                    c.learn_one(x, *y)?;
                }
                Ok(c)
            }
        }
    }

    /// An untrained incremental classifier.
    pub fn incremental(config: &ClassifierConfig, schema: &FeatureSchema) -> Result<Self> {
        let hoeffding = config.hoeffding;
        match config.kind {
            ClassifierKind::Ht => Ok(Classifier::Ht(HoeffdingTree::new(schema.clone(), hoeffding))),
            ClassifierKind::Aht => {
                let mut tree = AdaptiveHoeffdingTree::new(schema.clone(), hoeffding, config.adwin_delta);
                tree.set_monitors(config.monitors);
                Ok(Classifier::Aht(tree))
            }
            ClassifierKind::Rf => Err(Error::RediscoveryRequired),
        }
    }

    pub fn learn_one(&mut self, x: &FeatureVector, y: bool) -> Result<()> {
        match self {
            Classifier::Ht(t) => t.learn_one(x, y),
            Classifier::Aht(t) => t.learn_one(x, y),
            Classifier::Rf(_) => Err(Error::RediscoveryRequired),
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Score> {
        match self {
            Classifier::Ht(t) => t.predict(x),
            Classifier::Aht(t) => t.predict(x),
            Classifier::Rf(f) => f.predict(x),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Ht(_) => ClassifierKind::Ht,
            Classifier::Aht(_) => ClassifierKind::Aht,
            Classifier::Rf(_) => ClassifierKind::Rf,
        }
    }

    pub fn events(&self) -> hoeffding::Events {
        match self {
            Classifier::Ht(t) => t.events(),
            Classifier::Aht(t) => t.events(),
            Classifier::Rf(_) => hoeffding::Events::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{FeatureKind, FeatureValue};

    fn schema() -> FeatureSchema {
        FeatureSchema::new("c", vec![("a".into(), FeatureKind::Numeric)])
    }

    fn x(s: &FeatureSchema, v: f64) -> FeatureVector {
        FeatureVector {
            values: vec![FeatureValue::Numeric(v)],
            schema_id: s.id(),
        }
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("HT".parse::<ClassifierKind>().unwrap(), ClassifierKind::Ht);
        assert_eq!("aht".parse::<ClassifierKind>().unwrap(), ClassifierKind::Aht);
        assert!("svm".parse::<ClassifierKind>().is_err());
    }

    #[test]
    fn forest_refuses_updates() {
        let s = schema();
        let data = vec![(x(&s, 0.0), false), (x(&s, 1.0), true)];
        let mut rf = Classifier::fit(&ClassifierConfig::with_kind(ClassifierKind::Rf), &s, &data, 1).unwrap();
        assert!(matches!(rf.learn_one(&x(&s, 2.0), true), Err(Error::RediscoveryRequired)));
    }

    #[test]
    fn serialization_round_trip() {
        let s = schema();
        let data: Vec<_> = (0..500).map(|i| (x(&s, f64::from(i)), i % 3 == 0)).collect();
        for kind in [ClassifierKind::Ht, ClassifierKind::Aht, ClassifierKind::Rf] {
            let mut cfg = ClassifierConfig::with_kind(kind);
            cfg.forest.n_trees = 5;
            cfg.hoeffding.grace_period = 50;
            let c = Classifier::fit(&cfg, &s, &data, 7).unwrap();
            let text = serde_json::to_string(&c).unwrap();
            let back: Classifier = serde_json::from_str(&text).unwrap();
            assert_eq!(back, c);
            for i in 0..50 {
                let probe = x(&s, f64::from(i) * 10.0 + 0.5);
                assert_eq!(back.predict(&probe).unwrap(), c.predict(&probe).unwrap());
            }
        }
    }

    #[test]
    fn scores_stay_in_unit_interval() {
        let s = schema();
        let data: Vec<_> = (0..300).map(|i| (x(&s, f64::from(i % 17)), i % 5 < 2)).collect();
        for kind in [ClassifierKind::Ht, ClassifierKind::Aht, ClassifierKind::Rf] {
            let mut cfg = ClassifierConfig::with_kind(kind);
            cfg.forest.n_trees = 7;
            let c = Classifier::fit(&cfg, &s, &data, 3).unwrap();
            for i in 0..40 {
                let p = c.predict(&x(&s, f64::from(i) - 5.0)).unwrap();
                assert!((0.0..=1.0).contains(&p.score));
            }
        }
    }
}
