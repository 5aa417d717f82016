use serde::{Deserialize, Serialize};

use super::{case_labels, check_log, majority, PipelineConfig, Prediction};
use crate::classifiers::{Classifier, ClassifierKind};
use crate::encoding::{encode_index, EncodingSchema, FeatureVector, Prefix};
use crate::error::{Error, Result};
use crate::event_log::{Case, EventLog};
use crate::ltl::{label_case, Formula};

/// One classifier per prefix length `m` in the configured range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexPipeline {
    config: PipelineConfig,
    formula: Formula,
    schemas: Vec<EncodingSchema>,
    // None only for a forest with no length-m training prefix
    classifiers: Vec<Option<Classifier>>,
    trained: Vec<u64>,
    global_majority: bool,
    learn_calls: u64,
}

impl IndexPipeline {
    pub fn train(log: &EventLog, formula: &Formula, config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let labels = case_labels(log, formula)?;
        check_log(log, &labels)?;
        let lengths = config.prefix_min..=config.prefix_max;
        let mut schemas = Vec::new();
        let mut classifiers = Vec::new();
        let mut trained = Vec::new();
        let mut learn_calls = 0;
        for m in lengths {
            let schema = EncodingSchema::index_for_log(log, m);
            let data = log
                .cases()
                .iter()
                .zip(&labels)
                .filter(|(c, _)| c.len() >= m)
                .map(|(c, y)| Ok((encode_index(&Prefix::new(c, m, Some(*y)), &schema)?, *y)))
                .collect::<Result<Vec<(FeatureVector, bool)>>>()?;
            let seed = config.seed.wrapping_add((m as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let classifier = if data.is_empty() && !config.classifier.kind.is_incremental() {
                None
            } else {
                Some(Classifier::fit(&config.classifier, schema.features(), &data, seed)?)
            };
            if config.classifier.kind.is_incremental() {
                learn_calls += data.len() as u64;
            }
            trained.push(data.len() as u64);
            schemas.push(schema);
            classifiers.push(classifier);
        }
        Ok(IndexPipeline {
            config: *config,
            formula: formula.clone(),
            schemas,
            classifiers,
            trained,
            global_majority: majority(&labels),
            learn_calls,
        })
    }

    fn slot(&self, len: usize) -> Result<usize> {
        if len < self.config.prefix_min || len > self.config.prefix_max {
            return Err(Error::PrefixOutOfRange {
                len,
                min: self.config.prefix_min,
                max: self.config.prefix_max,
            });
        }
        Ok(len - self.config.prefix_min)
    }

    pub fn predict(&self, prefix: &Prefix<'_>) -> Result<Prediction> {
        let k = self.slot(prefix.length)?;
        match &self.classifiers[k] {
            Some(c) if self.trained[k] > 0 => {
                let x = encode_index(prefix, &self.schemas[k])?;
                Ok(Prediction::scored(prefix, c.predict(&x)?))
            }
            _ => Ok(Prediction::fallback(prefix, self.global_majority)),
        }
    }

    /// Trains the length-`m` classifier on the case's length-`m` prefix, for
    /// every configured `m` up to the case length.
    pub fn update(&mut self, case: &Case) -> Result<()> {
        if self.config.classifier.kind == ClassifierKind::Rf {
            return Err(Error::RediscoveryRequired);
        }
        let label = label_case(case, &self.formula)?;
        let upper = self.config.prefix_max.min(case.len());
        for m in self.config.prefix_min..=upper {
            let k = m - self.config.prefix_min;
            let x = encode_index(&Prefix::new(case, m, Some(label)), &self.schemas[k])?;
            self.classifiers[k]
                .as_mut()
                .expect("incremental pipelines keep a classifier per length")
                .learn_one(&x, label)?;
            self.trained[k] += 1;
            self.learn_calls += 1;
        }
        Ok(())
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn classifiers(&self) -> &[Option<Classifier>] {
        &self.classifiers
    }

    /// Training instances seen by each length's classifier, `prefix_min` first.
    pub fn trained_counts(&self) -> &[u64] {
        &self.trained
    }

    pub fn learn_calls(&self) -> u64 {
        self.learn_calls
    }
}
