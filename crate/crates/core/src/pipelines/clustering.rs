use serde::{Deserialize, Serialize};

use super::{case_labels, check_log, majority, PayloadSchema, PipelineConfig, Prediction};
use crate::canopy::{default_thresholds, CanopyModel};
use crate::classifiers::{Classifier, ClassifierKind};
use crate::encoding::{encode_frequency, extract_prefixes, EncodingSchema, FeatureVector, Prefix};
use crate::error::{Error, Result};
use crate::event_log::{Case, EventLog};
use crate::ltl::{label_case, Formula};

/// Canopies over prefix activity counts, one classifier per canopy.
///
/// Canopies overlap, but each prefix trains only the canopy with the nearest
/// center (Euclidean), the same canopy `predict` routes it to. A canopy that
/// no training prefix is routed to keeps no classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringPipeline {
    config: PipelineConfig,
    formula: Formula,
    frequency: EncodingSchema,
    payload: PayloadSchema,
    canopy: CanopyModel,
    classifiers: Vec<Option<Classifier>>,
    global_majority: bool,
    learn_calls: u64,
}

impl ClusteringPipeline {
    pub fn train(log: &EventLog, formula: &Formula, config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let labels = case_labels(log, formula)?;
        check_log(log, &labels)?;
        let frequency = EncodingSchema::frequency(log.activity_alphabet().to_vec());
        let payload = PayloadSchema::for_log(log);

        let mut items = Vec::new();
        let mut rows = Vec::new();
        for (case, label) in log.cases().iter().zip(&labels) {
            for prefix in extract_prefixes(case, Some(*label), config.prefix_min, config.prefix_max) {
                items.push(encode_frequency(&prefix, &frequency)?);
                rows.push((payload.encode(&prefix), *label));
            }
        }
        if items.is_empty() {
            return Err(Error::EmptyTrainingData);
        }
        let (t1, t2) = match (config.t1, config.t2) {
            (Some(t1), Some(t2)) => (t1, t2),
            _ => default_thresholds(&items)?,
        };
        let clustering = CanopyModel::build(&items, t1, t2)?;
        log::debug!(
            "{} canopies over {} prefixes (t1 {t1}, t2 {t2})",
            clustering.model.len(),
            items.len()
        );

        // refine: each prefix trains the canopy it would be routed to
        let mut refined = vec![Vec::new(); clustering.model.len()];
        for (i, item) in items.iter().enumerate() {
            refined[clustering.model.assign(item)?].push(i);
        }
        let mut classifiers = Vec::with_capacity(refined.len());
        let mut learn_calls = 0;
        for (k, members) in refined.iter().enumerate() {
            if members.is_empty() {
                classifiers.push(None);
                continue;
            }
            let data: Vec<(FeatureVector, bool)> = members.iter().map(|&i| rows[i].clone()).collect();
            let seed = config.seed.wrapping_add((k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            classifiers.push(Some(Classifier::fit(&config.classifier, payload.features(), &data, seed)?));
            if config.classifier.kind.is_incremental() {
                learn_calls += data.len() as u64;
            }
        }

        Ok(ClusteringPipeline {
            config: *config,
            formula: formula.clone(),
            frequency,
            payload,
            canopy: clustering.model,
            classifiers,
            global_majority: majority(&labels),
            learn_calls,
        })
    }

    pub fn predict(&self, prefix: &Prefix<'_>) -> Result<Prediction> {
        let k = self.canopy.assign(&encode_frequency(prefix, &self.frequency)?)?;
        match self.classifiers.get(k).and_then(Option::as_ref) {
            Some(c) => Ok(Prediction::scored(prefix, c.predict(&self.payload.encode(prefix))?)),
            None => Ok(Prediction::fallback(prefix, self.global_majority)),
        }
    }

    /// Inserts each prefix of the completed case into the canopies (possibly
    /// opening new ones) and trains the canopy the prefix is routed to.
    pub fn update(&mut self, case: &Case) -> Result<()> {
        if self.config.classifier.kind == ClassifierKind::Rf {
            return Err(Error::RediscoveryRequired);
        }
        let label = label_case(case, &self.formula)?;
        for prefix in extract_prefixes(case, Some(label), self.config.prefix_min, self.config.prefix_max) {
            let item = encode_frequency(&prefix, &self.frequency)?;
            self.canopy.insert(&item)?;
            let x = self.payload.encode(&prefix);
            let k = self.canopy.assign(&item)?;
            if k >= self.classifiers.len() {
                self.classifiers.resize(k + 1, None);
            }
            let slot = &mut self.classifiers[k];
            if slot.is_none() {
                *slot = Some(Classifier::incremental(&self.config.classifier, self.payload.features())?);
            }
            slot.as_mut().expect("just filled").learn_one(&x, label)?;
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

    pub fn canopy(&self) -> &CanopyModel {
        &self.canopy
    }

    pub fn classifiers(&self) -> &[Option<Classifier>] {
        &self.classifiers
    }

    pub fn learn_calls(&self) -> u64 {
        self.learn_calls
    }

    pub fn payload(&self) -> &PayloadSchema {
        &self.payload
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::{AttrValue, Event};
    use crate::ltl::parse_formula;

    fn case(id: &str, acts: &[&str], age: f64) -> Case {
        Case::new(id, acts.iter().map(|a| Event::new(*a)).collect()).with_static("age", AttrValue::Num(age))
    }

    /// Two control-flow families far apart in activity counts.
    fn two_variants(n: usize) -> EventLog {
        let mut cases = Vec::new();
        for i in 0..n {
            let id = format!("c{i}");
            if i % 2 == 0 {
                cases.push(case(&id, &["A", "A", "A", "A", "B"], 20.0 + i as f64));
            } else {
                cases.push(case(&id, &["X", "X", "X", "X", "Y"], 20.0 + i as f64));
            }
        }
        EventLog::from_cases(cases).unwrap()
    }

    fn cfg(kind: ClassifierKind) -> PipelineConfig {
        let mut c = PipelineConfig::new(super::super::Approach::Clustering, kind);
        c.t1 = Some(3.0);
        c.t2 = Some(1.5);
        c.classifier.forest.n_trees = 5;
        c
    }

    #[test]
    fn separated_variants_get_separate_canopies() {
        let log = two_variants(20);
        let f = parse_formula("F(B)").unwrap();
        let p = ClusteringPipeline::train(&log, &f, &cfg(ClassifierKind::Ht)).unwrap();
        assert!(p.canopy().len() >= 2);
        assert!(p.classifiers().iter().all(Option::is_some));
        let a = &log.cases()[0];
        let x = &log.cases()[1];
        let pa = p.predict(&Prefix::new(a, 3, None)).unwrap();
        let px = p.predict(&Prefix::new(x, 3, None)).unwrap();
        assert!(pa.label && !px.label);
        assert!(!pa.fallback);
    }

    #[test]
    fn single_case_log() {
        let log = EventLog::from_cases(vec![case("only", &["A", "B"], 30.0)]).unwrap();
        let f = parse_formula("F(B)").unwrap();
        let p = ClusteringPipeline::train(&log, &f, &PipelineConfig::default()).unwrap();
        assert_eq!(p.canopy().len(), 1);
        assert!(p.predict(&Prefix::new(&log.cases()[0], 1, None)).unwrap().label);
    }

    #[test]
    fn forest_backed_pipeline_refuses_updates() {
        let log = two_variants(10);
        let f = parse_formula("F(B)").unwrap();
        let mut p = ClusteringPipeline::train(&log, &f, &cfg(ClassifierKind::Rf)).unwrap();
        assert!(matches!(p.classifiers()[0], Some(Classifier::Rf(_))));
        assert!(matches!(
            p.update(&case("n", &["A", "B"], 1.0)),
            Err(Error::RediscoveryRequired)
        ));
    }

    #[test]
    fn novel_variant_opens_a_canopy() {
        let log = two_variants(10);
        // only the novel all-B flow satisfies G(B)
        let f = parse_formula("G(B)").unwrap();
        let mut p = ClusteringPipeline::train(&log, &f, &cfg(ClassifierKind::Ht)).unwrap();
        let before = p.canopy().len();
        let novel = case("n", &["B", "B", "B", "B", "B"], 50.0);
        p.update(&novel).unwrap();
        assert!(p.canopy().len() > before);
        let last = p.canopy().len() - 1;
        assert!(p.classifiers()[last].is_some());
        // the fresh canopy only ever saw positive prefixes
        let pred = p.predict(&Prefix::new(&novel, 5, None)).unwrap();
        assert!(pred.label && !pred.fallback);
    }

    #[test]
    fn update_inside_one_canopy_trains_one_classifier() {
        let log = two_variants(10);
        let f = parse_formula("F(B)").unwrap();
        let mut config = cfg(ClassifierKind::Ht);
        config.prefix_min = 5;
        config.prefix_max = 5;
        let mut p = ClusteringPipeline::train(&log, &f, &config).unwrap();
        let before = p.clone();
        p.update(&case("n", &["A", "A", "A", "A", "B"], 22.0)).unwrap();
        let changed = p
            .classifiers()
            .iter()
            .zip(before.classifiers())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed, 1);
        assert_eq!(p.learn_calls(), before.learn_calls() + 1);
    }
}
