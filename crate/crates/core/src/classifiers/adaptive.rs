//! Hoeffding tree with per-branch ADWIN monitors and alternate subtrees.
//!
//! Each internal node watches the error bit of the tree's prediction for the
//! instances routed through it. A detected error increase starts an
//! alternate subtree at that node (one at most), trained in parallel on the
//! same instances. Once the alternate has seen more than
//! [`MIN_ALT_INSTANCES`] instances, the error rates of branch and alternate
//! on those instances are compared with
//!
//! ```text
//! bound = sqrt(2 e (1 - e) ln(2 / SWITCH_DELTA) (1/n + 1/n))
//! ```
//!
//! (`e` the branch error rate, `n` the shared instance count). Windowed
//! ADWIN means are not used here: prefixes of one case arrive together and
//! share a label, so the error stream is bursty and the branch window keeps
//! collapsing to a few dozen instances. The
//! alternate replaces the branch when it is ahead by more than `bound`, and
//! is discarded when it trails by more.

use serde::{Deserialize, Serialize};

use super::adwin::DEFAULT_DELTA;
use super::hoeffding::{Ctx, Events, HoeffdingConfig, Node, TreeStats};
use super::Score;
use crate::encoding::{FeatureSchema, FeatureVector};
use crate::error::Result;

pub const MIN_ALT_INSTANCES: u64 = 300;
pub const SWITCH_DELTA: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveHoeffdingTree {
    config: HoeffdingConfig,
    adwin_delta: f64,
    monitors_enabled: bool,
    schema: FeatureSchema,
    root: Node,
    events: Events,
}

impl AdaptiveHoeffdingTree {
    pub fn new(schema: FeatureSchema, config: HoeffdingConfig, adwin_delta: f64) -> Self {
        let root = Node::leaf(
            [0, 0],
            &Ctx {
                config: &config,
                kinds: schema.kinds(),
                monitor_delta: None,
            },
        );
        AdaptiveHoeffdingTree {
            config,
            adwin_delta,
            monitors_enabled: true,
            schema,
            root,
            events: Events::default(),
        }
    }

    pub fn with_default_delta(schema: FeatureSchema, config: HoeffdingConfig) -> Self {
        Self::new(schema, config, DEFAULT_DELTA)
    }

    /// With monitors off no branch is ever watched, so the tree grows exactly
    /// like a plain Hoeffding tree.
    pub fn set_monitors(&mut self, enabled: bool) {
        self.monitors_enabled = enabled;
    }

    pub fn learn_one(&mut self, x: &FeatureVector, y: bool) -> Result<()> {
        self.schema.check(x)?;
        let wrong = self.root.predict(&x.values, self.config.default_label).label != y;
        let ctx = Ctx {
            config: &self.config,
            kinds: self.schema.kinds(),
            monitor_delta: self.monitors_enabled.then_some(self.adwin_delta),
        };
        self.root.learn(&x.values, y, wrong, &ctx, &mut self.events);
        Ok(())
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Score> {
        self.schema.check(x)?;
        Ok(self.root.predict(&x.values, self.config.default_label))
    }

    pub fn config(&self) -> &HoeffdingConfig {
        &self.config
    }

    pub fn adwin_delta(&self) -> f64 {
        self.adwin_delta
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn stats(&self) -> TreeStats {
        self.root.stats()
    }

    pub fn events(&self) -> Events {
        self.events
    }
}

#[cfg(test)]
mod tests {
    use super::super::hoeffding::HoeffdingTree;
    use super::*;
    use crate::encoding::{FeatureKind, FeatureValue};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            "aht",
            vec![
                ("a".into(), FeatureKind::Numeric),
                ("b".into(), FeatureKind::Numeric),
                ("c".into(), FeatureKind::Categorical),
            ],
        )
    }

    fn draw(rng: &mut ChaCha8Rng, s: &FeatureSchema) -> (FeatureVector, f64, f64, String) {
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        let c = ["u", "v", "w"][rng.random_range(0..3)].to_string();
        let x = FeatureVector {
            values: vec![
                FeatureValue::Numeric(a),
                FeatureValue::Numeric(b),
                FeatureValue::Categorical(c.clone()),
            ],
            schema_id: s.id(),
        };
        (x, a, b, c)
    }

    fn quick() -> HoeffdingConfig {
        HoeffdingConfig {
            grace_period: 100,
            ..HoeffdingConfig::default()
        }
    }

    #[test]
    fn stationary_stream_matches_plain_tree() {
        let s = schema();
        let mut ht = HoeffdingTree::new(s.clone(), quick());
        let mut aht = AdaptiveHoeffdingTree::with_default_delta(s.clone(), quick());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..6000 {
            let (x, a, b, _) = draw(&mut rng, &s);
            let y = if a < 0.5 { b < 0.7 } else { b < 0.2 };
            ht.learn_one(&x, y).unwrap();
            aht.learn_one(&x, y).unwrap();
        }
        assert_eq!(aht.events().alternates, 0);
        for _ in 0..1000 {
            let (x, ..) = draw(&mut rng, &s);
            assert_eq!(ht.predict(&x).unwrap(), aht.predict(&x).unwrap());
        }
    }

    #[test]
    fn disabled_monitors_match_plain_tree_under_drift() {
        let s = schema();
        let mut ht = HoeffdingTree::new(s.clone(), quick());
        let mut aht = AdaptiveHoeffdingTree::with_default_delta(s.clone(), quick());
        aht.set_monitors(false);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 0..8000 {
            let (x, a, _, c) = draw(&mut rng, &s);
            let y = if i < 4000 { a < 0.5 } else { c == "u" };
            ht.learn_one(&x, y).unwrap();
            aht.learn_one(&x, y).unwrap();
            if i % 97 == 0 {
                assert_eq!(ht.predict(&x).unwrap(), aht.predict(&x).unwrap());
            }
        }
        assert_eq!(aht.events().alternates, 0);
        assert_eq!(ht.stats(), aht.stats());
    }

    #[test]
    fn label_flip_triggers_replacement() {
        let s = schema();
        let mut aht = AdaptiveHoeffdingTree::with_default_delta(s.clone(), quick());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let concept = |a: f64, b: f64, flipped: bool| (a < 0.5 && b < 0.6) != flipped;
        let mut correct_before = 0;
        let mut correct_after = 0;
        let mut replaced_at = None;
        for i in 0..12_000 {
            let (x, a, b, _) = draw(&mut rng, &s);
            let y = concept(a, b, i >= 6000);
            let hit = aht.predict(&x).unwrap().label == y;
            if i >= 6000 {
                if replaced_at.is_none() {
                    correct_before += usize::from(hit);
                } else if i >= 10_000 {
                    correct_after += usize::from(hit);
                }
            }
            aht.learn_one(&x, y).unwrap();
            if replaced_at.is_none() && aht.events().replacements > 0 {
                replaced_at = Some(i);
            }
        }
        let at = replaced_at.expect("no replacement after the flip");
        assert!(at > 6000 && at < 10_000, "{at}");
        let before = correct_before as f64 / (at + 1 - 6000) as f64;
        let after = correct_after as f64 / 2000.0;
        assert!(after > before, "before {before}, after {after}");
        assert!(after > 0.9, "{after}");
    }
}
