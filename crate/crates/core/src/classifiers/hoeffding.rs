//! Hoeffding tree (VFDT) for binary labels.
//!
//! Leaves keep class counts plus one observer per feature: a 10-bin
//! equal-width histogram for numeric features (range tracked online, absent
//! values counted apart and routed right) or a value table for categorical
//! ones (absent is its own value). Every `grace_period` instances a leaf
//! ranks the candidate splits by information gain and splits on the best when
//! `G1 - G2 > eps` or `eps < tau`, with `eps` from [`hoeffding_bound`].
//!
//! The node type carries an optional drift monitor so the adaptive tree can
//! share all of this; see `adaptive.rs`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::adwin::Adwin;
use super::Score;
use crate::encoding::{FeatureKind, FeatureSchema, FeatureValue, FeatureVector};
use crate::error::Result;

pub const ABSENT_KEY: &str = "\u{2205}";

/// `sqrt(R^2 ln(1/delta) / (2n))`.
pub fn hoeffding_bound(range: f64, delta: f64, n: f64) -> f64 {
    (range * range * (1.0 / delta).ln() / (2.0 * n)).sqrt()
}

fn entropy(counts: [u64; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|c| **c > 0)
        .map(|c| {
            let p = *c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Information gain of partitioning `parent` into `branches`, in bits.
pub(crate) fn info_gain(parent: [u64; 2], branches: &[[u64; 2]]) -> f64 {
    let n = (parent[0] + parent[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let children: f64 = branches
        .iter()
        .map(|b| (b[0] + b[1]) as f64 / n * entropy(*b))
        .sum();
    entropy(parent) - children
}

fn class(y: bool) -> usize {
    usize::from(y)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingConfig {
    pub delta: f64,
    pub tau: f64,
    pub grace_period: u64,
    pub bins: usize,
    /// Label returned when a leaf has no majority.
    pub default_label: bool,
}

impl Default for HoeffdingConfig {
    fn default() -> Self {
        HoeffdingConfig {
            delta: 1e-7,
            tau: 0.05,
            grace_period: 200,
            bins: 10,
            default_label: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct NumericObserver {
    lo: f64,
    hi: f64,
    any: bool,
    bins: Vec<[u64; 2]>,
    absent: [u64; 2],
}

impl NumericObserver {
    fn new(bins: usize) -> Self {
        NumericObserver {
            lo: 0.0,
            hi: 0.0,
            any: false,
            bins: vec![[0; 2]; bins.max(2)],
            absent: [0; 2],
        }
    }

    fn bin_of(&self, v: f64) -> usize {
        let n = self.bins.len();
        if self.hi <= self.lo {
            return 0;
        }
        (((v - self.lo) / (self.hi - self.lo) * n as f64).floor().max(0.0) as usize).min(n - 1)
    }

    fn observe(&mut self, v: Option<f64>, y: bool) {
        let Some(v) = v else {
            self.absent[class(y)] += 1;
            return;
        };
        if !self.any {
            self.lo = v;
            self.hi = v;
            self.any = true;
        } else if v < self.lo || v > self.hi {
            self.rebin(self.lo.min(v), self.hi.max(v));
        }
        let b = self.bin_of(v);
        self.bins[b][class(y)] += 1;
    }

    /// Widens the range, moving each old bin to wherever its midpoint lands.
    fn rebin(&mut self, lo: f64, hi: f64) {
        let n = self.bins.len();
        let old = std::mem::replace(&mut self.bins, vec![[0; 2]; n]);
        let (old_lo, width) = (self.lo, (self.hi - self.lo) / n as f64);
        self.lo = lo;
        self.hi = hi;
        for (k, counts) in old.into_iter().enumerate() {
            if counts == [0, 0] {
                continue;
            }
            let b = self.bin_of(old_lo + (k as f64 + 0.5) * width);
            self.bins[b][0] += counts[0];
            self.bins[b][1] += counts[1];
        }
    }

    /// Best `x < threshold` split over the interior bin edges.
    fn best_split(&self, parent: [u64; 2]) -> Option<Candidate> {
        if !self.any || self.hi <= self.lo {
            return None;
        }
        let n = self.bins.len();
        let width = (self.hi - self.lo) / n as f64;
        let mut left = [0u64; 2];
        let mut best: Option<Candidate> = None;
        for k in 1..n {
            left[0] += self.bins[k - 1][0];
            left[1] += self.bins[k - 1][1];
            let right = [parent[0] - left[0], parent[1] - left[1]];
            if left == [0, 0] || right == [0, 0] {
                continue;
            }
            let gain = info_gain(parent, &[left, right]);
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    gain,
                    test: CandidateTest::Threshold(self.lo + k as f64 * width),
                    dists: vec![(String::new(), left), (String::new(), right)],
                });
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) enum Observer {
    Numeric(NumericObserver),
    Categorical(BTreeMap<String, [u64; 2]>),
}

impl Observer {
    fn new(kind: FeatureKind, bins: usize) -> Self {
        match kind {
            FeatureKind::Numeric => Observer::Numeric(NumericObserver::new(bins)),
            FeatureKind::Categorical => Observer::Categorical(BTreeMap::new()),
        }
    }

    fn observe(&mut self, v: &FeatureValue, y: bool) {
        match self {
            Observer::Numeric(o) => o.observe(v.as_numeric(), y),
            Observer::Categorical(table) => {
                table.entry(category_key(v).to_string()).or_insert([0; 2])[class(y)] += 1;
            }
        }
    }

    fn best_split(&self, parent: [u64; 2]) -> Option<Candidate> {
        match self {
            Observer::Numeric(o) => o.best_split(parent),
            Observer::Categorical(table) => {
                if table.len() < 2 {
                    return None;
                }
                let dists: Vec<(String, [u64; 2])> = table.iter().map(|(k, c)| (k.clone(), *c)).collect();
                let branches: Vec<[u64; 2]> = dists.iter().map(|(_, c)| *c).collect();
                Some(Candidate {
                    gain: info_gain(parent, &branches),
                    test: CandidateTest::Categories,
                    dists,
                })
            }
        }
    }
}

fn category_key(v: &FeatureValue) -> &str {
    match v {
        FeatureValue::Categorical(s) => s,
        FeatureValue::Numeric(_) | FeatureValue::Absent => ABSENT_KEY,
    }
}

struct Candidate {
    gain: f64,
    test: CandidateTest,
    // class counts per branch: (left, right) or per category
    dists: Vec<(String, [u64; 2])>,
}

enum CandidateTest {
    Threshold(f64),
    Categories,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Leaf {
    seen: u64,
    since_attempt: u64,
    observers: Vec<Observer>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) enum Test {
    Threshold {
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Categories(BTreeMap<String, Node>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) enum Body {
    Leaf(Leaf),
    Split { feature: usize, test: Test },
}

/// Drift bookkeeping attached to internal nodes of the adaptive tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Monitor {
    /// Error stream of this branch.
    pub adwin: Adwin,
    pub alternate: Option<Box<Node>>,
    // errors of branch and alternate on the instances both saw
    pub main_errors: u64,
    pub alt_errors: u64,
    pub alt_seen: u64,
}

impl Monitor {
    pub fn new(delta: f64) -> Self {
        Monitor {
            adwin: Adwin::new(delta),
            alternate: None,
            main_errors: 0,
            alt_errors: 0,
            alt_seen: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Node {
    pub counts: [u64; 2],
    pub body: Body,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitor: Option<Box<Monitor>>,
}

/// What the shared learner needs to know about the tree it is growing.
pub(crate) struct Ctx<'a> {
    pub config: &'a HoeffdingConfig,
    pub kinds: &'a [FeatureKind],
    /// ADWIN delta when internal nodes are monitored.
    pub monitor_delta: Option<f64>,
}

/// Split statistics for tests and reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub leaves: usize,
    pub splits: usize,
    pub depth: usize,
}

impl Node {
    pub fn leaf(counts: [u64; 2], ctx: &Ctx<'_>) -> Self {
        Node {
            counts,
            body: Body::Leaf(Leaf {
                seen: 0,
                since_attempt: 0,
                observers: ctx.kinds.iter().map(|k| Observer::new(*k, ctx.config.bins)).collect(),
            }),
            monitor: None,
        }
    }

    /// Majority label and Laplace score of the leaf `x` reaches.
    pub fn predict(&self, x: &[FeatureValue], default_label: bool) -> Score {
        let mut node = self;
        loop {
            match node.child(x) {
                Some(next) => node = next,
                None => return score_counts(node.counts, default_label),
            }
        }
    }

    fn child(&self, x: &[FeatureValue]) -> Option<&Node> {
        match &self.body {
            Body::Leaf(_) => None,
            Body::Split { feature, test } => match test {
                Test::Threshold { value, left, right } => Some(match x[*feature].as_numeric() {
                    Some(v) if v < *value => left,
                    _ => right,
                }),
                Test::Categories(children) => children.get(category_key(&x[*feature])),
            },
        }
    }

    /// Routes one instance down the tree. `wrong` is whether this tree's
    /// prediction for `x` (made before learning) was wrong; every monitor on
    /// the path sees it, since they all route to the same leaf.
    pub fn learn(&mut self, x: &[FeatureValue], y: bool, wrong: bool, ctx: &Ctx<'_>, events: &mut Events) {
        self.counts[class(y)] += 1;
        if self.monitor.is_some() && self.watch(x, y, wrong, ctx, events) {
            // replaced by its alternate, which has already learned `x`
            return;
        }
        match &mut self.body {
            Body::Leaf(leaf) => {
                leaf.seen += 1;
                leaf.since_attempt += 1;
                for (obs, v) in leaf.observers.iter_mut().zip(x) {
                    obs.observe(v, y);
                }
                if leaf.since_attempt >= ctx.config.grace_period {
                    leaf.since_attempt = 0;
                    self.attempt_split(ctx, events);
                }
            }
            Body::Split { feature, test } => {
                let child = match test {
                    Test::Threshold { value, left, right } => match x[*feature].as_numeric() {
                        Some(v) if v < *value => left.as_mut(),
                        _ => right.as_mut(),
                    },
                    Test::Categories(children) => children
                        .entry(category_key(&x[*feature]).to_string())
                        .or_insert_with(|| Node::leaf([0, 0], ctx)),
                };
                child.learn(x, y, wrong, ctx, events);
            }
        }
    }

    /// Feeds the monitor; returns true when the alternate took this node's place.
    fn watch(&mut self, x: &[FeatureValue], y: bool, wrong: bool, ctx: &Ctx<'_>, events: &mut Events) -> bool {
        let delta = ctx.monitor_delta.unwrap_or(super::adwin::DEFAULT_DELTA);
        let default_label = ctx.config.default_label;
        let monitor = self.monitor.as_mut().expect("monitored node");
        let change = monitor.adwin.update(if wrong { 1.0 } else { 0.0 });
        if monitor.alternate.is_none() && change.is_some_and(|c| c.increased()) {
            monitor.alternate = Some(Box::new(Node::leaf([0, 0], ctx)));
            monitor.main_errors = 0;
            monitor.alt_errors = 0;
            monitor.alt_seen = 0;
            events.alternates += 1;
        }
        let Some(alt) = monitor.alternate.as_mut() else {
            return false;
        };
        let alt_wrong = alt.predict(x, default_label).label != y;
        alt.learn(x, y, alt_wrong, ctx, events);
        monitor.alt_seen += 1;
        monitor.main_errors += u64::from(wrong);
        monitor.alt_errors += u64::from(alt_wrong);

        // paired comparison over the instances seen since the alternate started
        if monitor.alt_seen <= super::adaptive::MIN_ALT_INSTANCES {
            return false;
        }
        let n = monitor.alt_seen as f64;
        let e_main = monitor.main_errors as f64 / n;
        let e_alt = monitor.alt_errors as f64 / n;
        let bound = (2.0 * e_main * (1.0 - e_main) * (2.0 / super::adaptive::SWITCH_DELTA).ln() * (2.0 / n)).sqrt();
        if bound < e_main - e_alt {
            let mut alt = *monitor.alternate.take().expect("alternate present");
            if matches!(alt.body, Body::Leaf(_)) {
                alt.monitor = None;
            } else if alt.monitor.is_none() {
                alt.monitor = Some(Box::new(Monitor::new(delta)));
            }
            *self = alt;
            events.replacements += 1;
            true
        } else {
            if bound < e_alt - e_main {
                monitor.alternate = None;
                events.pruned += 1;
            }
            false
        }
    }

    fn attempt_split(&mut self, ctx: &Ctx<'_>, events: &mut Events) {
        let Body::Leaf(leaf) = &self.body else {
            return;
        };
        // class counts of the instances the observers saw
        let parent = match leaf.observers.first() {
            Some(Observer::Numeric(o)) => o.bins.iter().fold(o.absent, |a, b| [a[0] + b[0], a[1] + b[1]]),
            Some(Observer::Categorical(t)) => t.values().fold([0, 0], |a, b| [a[0] + b[0], a[1] + b[1]]),
            None => return,
        };
        if parent[0] == 0 || parent[1] == 0 {
            return;
        }
        let mut ranked: Vec<(usize, Candidate)> = leaf
            .observers
            .iter()
            .enumerate()
            .filter_map(|(f, o)| o.best_split(parent).map(|c| (f, c)))
            .collect();
        // stable: equal gains keep the lower feature index first
        ranked.sort_by(|a, b| b.1.gain.total_cmp(&a.1.gain));
        let Some((feature, best)) = ranked.first() else {
            return;
        };
        let g2 = ranked.get(1).map_or(0.0, |(_, c)| c.gain.max(0.0));
        let eps = hoeffding_bound(1.0, ctx.config.delta, leaf.seen as f64);
        if best.gain <= 0.0 || !(best.gain - g2 > eps || eps < ctx.config.tau) {
            return;
        }
        let feature = *feature;
        let test = match best.test {
            CandidateTest::Threshold(value) => Test::Threshold {
                value,
                left: Box::new(Node::leaf(best.dists[0].1, ctx)),
                right: Box::new(Node::leaf(best.dists[1].1, ctx)),
            },
            CandidateTest::Categories => Test::Categories(
                best.dists
                    .iter()
                    .map(|(k, c)| (k.clone(), Node::leaf(*c, ctx)))
                    .collect(),
            ),
        };
        self.body = Body::Split { feature, test };
        if let Some(delta) = ctx.monitor_delta {
            self.monitor = Some(Box::new(Monitor::new(delta)));
        }
        events.splits += 1;
    }

    pub fn stats(&self) -> TreeStats {
        match &self.body {
            Body::Leaf(_) => TreeStats {
                leaves: 1,
                splits: 0,
                depth: 0,
            },
            Body::Split { test, .. } => {
                let children: Vec<&Node> = match test {
                    Test::Threshold { left, right, .. } => vec![left, right],
                    Test::Categories(c) => c.values().collect(),
                };
                children.iter().fold(
                    TreeStats {
                        leaves: 0,
                        splits: 1,
                        depth: 0,
                    },
                    |acc, c| {
                        let s = c.stats();
                        TreeStats {
                            leaves: acc.leaves + s.leaves,
                            splits: acc.splits + s.splits,
                            depth: acc.depth.max(s.depth + 1),
                        }
                    },
                )
            }
        }
    }

    pub fn split_feature(&self) -> Option<usize> {
        match &self.body {
            Body::Split { feature, .. } => Some(*feature),
            Body::Leaf(_) => None,
        }
    }
}

pub(crate) fn score_counts(counts: [u64; 2], default_label: bool) -> Score {
    let (neg, pos) = (counts[0], counts[1]);
    Score {
        label: match pos.cmp(&neg) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => default_label,
        },
        score: (pos as f64 + 1.0) / ((pos + neg) as f64 + 2.0),
    }
}

/// Structural events observed while learning.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Events {
    pub splits: u64,
    pub alternates: u64,
    pub replacements: u64,
    pub pruned: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingTree {
    config: HoeffdingConfig,
    schema: FeatureSchema,
    root: Node,
    events: Events,
}

impl HoeffdingTree {
    pub fn new(schema: FeatureSchema, config: HoeffdingConfig) -> Self {
        let root = Node::leaf(
            [0, 0],
            &Ctx {
                config: &config,
                kinds: schema.kinds(),
                monitor_delta: None,
            },
        );
        HoeffdingTree {
            config,
            schema,
            root,
            events: Events::default(),
        }
    }

    pub fn learn_one(&mut self, x: &FeatureVector, y: bool) -> Result<()> {
        self.schema.check(x)?;
        let ctx = Ctx {
            config: &self.config,
            kinds: self.schema.kinds(),
            monitor_delta: None,
        };
        self.root.learn(&x.values, y, false, &ctx, &mut self.events);
        Ok(())
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Score> {
        self.schema.check(x)?;
        Ok(self.root.predict(&x.values, self.config.default_label))
    }

    pub fn config(&self) -> &HoeffdingConfig {
        &self.config
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

    pub fn root_split_feature(&self) -> Option<usize> {
        self.root.split_feature()
    }

    #[cfg(test)]
    pub(crate) fn root(&self) -> &Node {
        &self.root
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::FeatureKind as K;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn schema(kinds: &[K]) -> FeatureSchema {
        FeatureSchema::new(
            "t",
            kinds.iter().enumerate().map(|(i, k)| (format!("f{i}"), *k)).collect(),
        )
    }

    fn num(schema: &FeatureSchema, xs: &[f64]) -> FeatureVector {
        FeatureVector {
            values: xs.iter().map(|v| FeatureValue::Numeric(*v)).collect(),
            schema_id: schema.id(),
        }
    }

    /// Independent root-to-leaf walk.
    fn walk(node: &Node, x: &[FeatureValue]) -> [u64; 2] {
        match &node.body {
            Body::Leaf(_) => node.counts,
            Body::Split { feature, test } => match test {
                Test::Threshold { value, left, right } => {
                    if let FeatureValue::Numeric(v) = x[*feature] {
                        if v < *value {
                            return walk(left, x);
                        }
                    }
                    walk(right, x)
                }
                Test::Categories(children) => {
                    let key = match &x[*feature] {
                        FeatureValue::Categorical(s) => s.as_str(),
                        _ => ABSENT_KEY,
                    };
                    children.get(key).map_or(node.counts, |c| walk(c, x))
                }
            },
        }
    }

    #[test]
    fn bound_values() {
        assert!((hoeffding_bound(1.0, 0.05, 1000.0) - 0.0387).abs() < 1e-4);
        assert!((hoeffding_bound(1.0, 0.05, 1000.0) - (20f64.ln() / 2000.0).sqrt()).abs() < 1e-15);
        let mut last = f64::INFINITY;
        for n in 1..500 {
            let e = hoeffding_bound(1.0, 1e-7, n as f64);
            assert!(e < last);
            last = e;
        }
        assert!(hoeffding_bound(1.0, 1e-9, 100.0) > hoeffding_bound(1.0, 1e-3, 100.0));
    }

    #[test]
    fn gain_oracle() {
        // perfect binary split of a balanced set is worth one bit
        assert!((info_gain([5, 5], &[[5, 0], [0, 5]]) - 1.0).abs() < 1e-12);
        assert_eq!(info_gain([5, 5], &[[2, 2], [3, 3]]), 0.0);
        let h = |p: f64| -(p * p.log2() + (1.0 - p) * (1.0 - p).log2());
        let expected = h(0.5) - 0.6 * h(4.0 / 6.0) - 0.4 * h(1.0 / 4.0);
        assert!((info_gain([5, 5], &[[2, 4], [3, 1]]) - expected).abs() < 1e-12);
    }

    #[test]
    fn fresh_and_single_instance() {
        let s = schema(&[K::Numeric]);
        let tree = HoeffdingTree::new(s.clone(), HoeffdingConfig::default());
        let fresh = tree.predict(&num(&s, &[1.0])).unwrap();
        assert_eq!((fresh.label, fresh.score), (false, 0.5));

        let mut tree = HoeffdingTree::new(s.clone(), HoeffdingConfig::default());
        tree.learn_one(&num(&s, &[1.0]), true).unwrap();
        assert!(tree.predict(&num(&s, &[1.0])).unwrap().label);
        assert_eq!(tree.stats().splits, 0);
    }

    #[test]
    fn laplace_score() {
        let s = score_counts([1, 9], false);
        assert!(s.label);
        assert!((s.score - 10.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn splits_on_the_determining_feature() {
        let s = schema(&[K::Numeric, K::Numeric, K::Categorical]);
        let config = HoeffdingConfig {
            grace_period: 50,
            ..HoeffdingConfig::default()
        };
        let mut tree = HoeffdingTree::new(s.clone(), config);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            let c = ["x", "y", "z"][rng.random_range(0..3)];
            let x = FeatureVector {
                values: vec![
                    FeatureValue::Numeric(a),
                    FeatureValue::Numeric(b),
                    FeatureValue::Categorical(c.into()),
                ],
                schema_id: s.id(),
            };
            tree.learn_one(&x, b > 0.5).unwrap();
            if tree.stats().splits > 0 {
                break;
            }
        }
        assert_eq!(tree.root_split_feature(), Some(1));
    }

    #[test]
    fn first_split_matches_brute_force_gain() {
        // the chosen feature maximizes gain recomputed from the raw instances
        let s = schema(&[K::Categorical, K::Categorical]);
        let config = HoeffdingConfig {
            grace_period: 50,
            ..HoeffdingConfig::default()
        };
        let mut tree = HoeffdingTree::new(s.clone(), config);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = Vec::new();
        while tree.stats().splits == 0 && seen.len() < 5000 {
            let a = rng.random_range(0..3u8);
            let b = rng.random_range(0..2u8);
            let y = if a == 0 { rng.random::<f64>() < 0.9 } else { rng.random::<f64>() < 0.2 };
            let x = FeatureVector {
                values: vec![
                    FeatureValue::Categorical(a.to_string()),
                    FeatureValue::Categorical(b.to_string()),
                ],
                schema_id: s.id(),
            };
            tree.learn_one(&x, y).unwrap();
            seen.push((a, b, y));
        }
        let gain_of = |pick: &dyn Fn(&(u8, u8, bool)) -> u8| {
            let mut parent = [0u64; 2];
            let mut branches = BTreeMap::<u8, [u64; 2]>::new();
            for r in &seen {
                parent[usize::from(r.2)] += 1;
                branches.entry(pick(r)).or_default()[usize::from(r.2)] += 1;
            }
            info_gain(parent, &branches.into_values().collect::<Vec<_>>())
        };
        let ga = gain_of(&|r| r.0);
        let gb = gain_of(&|r| r.1);
        assert!(ga > gb);
        assert_eq!(tree.root_split_feature(), Some(0));
    }

    #[test]
    fn predictions_follow_the_tree_walk() {
        let s = schema(&[K::Numeric, K::Numeric, K::Categorical]);
        let config = HoeffdingConfig {
            grace_period: 100,
            ..HoeffdingConfig::default()
        };
        let mut tree = HoeffdingTree::new(s.clone(), config);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sample = |rng: &mut ChaCha8Rng| {
            let (a, b): (f64, f64) = (rng.random(), rng.random::<f64>() * 10.0);
            let c = ["p", "q", "r", "s"][rng.random_range(0..4)];
            let values = vec![
                if rng.random::<f64>() < 0.1 {
                    FeatureValue::Absent
                } else {
                    FeatureValue::Numeric(a)
                },
                FeatureValue::Numeric(b),
                FeatureValue::Categorical(c.into()),
            ];
            let y = (a < 0.4 && c != "q") || b > 8.0;
            (FeatureVector { values, schema_id: s.id() }, y)
        };
        for _ in 0..8000 {
            let (x, y) = sample(&mut rng);
            tree.learn_one(&x, y).unwrap();
        }
        assert!(tree.stats().splits >= 2, "{:?}", tree.stats());
        for _ in 0..1000 {
            let (x, _) = sample(&mut rng);
            let got = tree.predict(&x).unwrap();
            let expected = score_counts(walk(tree.root(), &x.values), false);
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn histogram_rebins_by_midpoint() {
        let mut o = NumericObserver::new(10);
        o.observe(Some(0.0), true);
        o.observe(Some(10.0), false);
        assert_eq!(o.bins[0], [0, 1]);
        assert_eq!(o.bins[9], [1, 0]);
        o.observe(Some(20.0), false);
        // old bin 0 midpoint 0.5 -> new bin 0; old bin 9 midpoint 9.5 -> new bin 4
        assert_eq!(o.bins[0], [0, 1]);
        assert_eq!(o.bins[4], [1, 0]);
        assert_eq!(o.bins[9], [1, 0]);
        o.observe(None, true);
        assert_eq!(o.absent, [0, 1]);
        let total: u64 = o.bins.iter().map(|b| b[0] + b[1]).sum();
        assert_eq!(total, 3);
    }

    #[test]
    fn schema_mismatch() {
        let s = schema(&[K::Numeric]);
        let mut tree = HoeffdingTree::new(s, HoeffdingConfig::default());
        let other = schema(&[K::Categorical]);
        assert!(tree.learn_one(&num(&other, &[1.0]), true).is_err());
    }
}
