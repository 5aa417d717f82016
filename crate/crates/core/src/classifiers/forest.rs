//! Batch CART trees and a bagged random forest over them.
//!
//! Splits are binary and chosen by weighted Gini impurity: `x < t` for numeric
//! features (candidate thresholds at midpoints between consecutive distinct
//! values, absent values routed right) and `x == c` against the rest for
//! categorical ones. Trees grow until a node is pure, has fewer than two
//! samples, or no feature separates it.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hoeffding::ABSENT_KEY;
use super::Score;
use crate::encoding::{FeatureKind, FeatureSchema, FeatureValue, FeatureVector};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum CartTest {
    Below(f64),
    Is(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum CartNode {
    Leaf([u64; 2]),
    Split {
        feature: usize,
        test: CartTest,
        left: Box<CartNode>,
        right: Box<CartNode>,
    },
}

fn key(v: &FeatureValue) -> &str {
    match v {
        FeatureValue::Categorical(s) => s,
        _ => ABSENT_KEY,
    }
}

fn goes_left(test: &CartTest, v: &FeatureValue) -> bool {
    match test {
        CartTest::Below(t) => v.as_numeric().is_some_and(|x| x < *t),
        CartTest::Is(c) => key(v) == c,
    }
}

fn gini(c: [u64; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = c[1] as f64 / n;
    2.0 * p * (1.0 - p)
}

fn weighted_gini(left: [u64; 2], right: [u64; 2]) -> f64 {
    let nl = (left[0] + left[1]) as f64;
    let nr = (right[0] + right[1]) as f64;
    (nl * gini(left) + nr * gini(right)) / (nl + nr)
}

fn vote(counts: [u64; 2], default_label: bool) -> bool {
    match counts[1].cmp(&counts[0]) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => default_label,
    }
}

struct Grower<'a> {
    data: &'a [(FeatureVector, bool)],
    kinds: &'a [FeatureKind],
    max_features: usize,
    rng: ChaCha8Rng,
}

impl Grower<'_> {
    fn grow(&mut self, idx: Vec<usize>) -> CartNode {
        let mut counts = [0u64; 2];
        for &i in &idx {
            counts[usize::from(self.data[i].1)] += 1;
        }
        if counts[0] == 0 || counts[1] == 0 || idx.len() < 2 {
            return CartNode::Leaf(counts);
        }
        let mut features: Vec<usize> = (0..self.kinds.len()).collect();
        features.shuffle(&mut self.rng);
        let mut best: Option<(f64, usize, CartTest)> = None;
        for (tried, &f) in features.iter().enumerate() {
            // keep drawing features past the quota only while nothing splits
            if tried >= self.max_features && best.is_some() {
                break;
            }
            if let Some((impurity, test)) = self.best_for(f, &idx) {
                if best.as_ref().is_none_or(|b| impurity < b.0) {
                    best = Some((impurity, f, test));
                }
            }
        }
        let Some((_, feature, test)) = best else {
            return CartNode::Leaf(counts);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| goes_left(&test, &self.data[i].0.values[feature]));
        CartNode::Split {
            feature,
            test,
            left: Box::new(self.grow(left)),
            right: Box::new(self.grow(right)),
        }
    }

    fn best_for(&self, f: usize, idx: &[usize]) -> Option<(f64, CartTest)> {
        match self.kinds[f] {
            FeatureKind::Numeric => {
                let mut present: Vec<(f64, bool)> = Vec::with_capacity(idx.len());
                let mut absent = [0u64; 2];
                for &i in idx {
                    let (x, y) = &self.data[i];
                    match x.values[f].as_numeric() {
                        Some(v) => present.push((v, *y)),
                        None => absent[usize::from(*y)] += 1,
                    }
                }
                present.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut total = absent;
                for (_, y) in &present {
                    total[usize::from(*y)] += 1;
                }
                let mut left = [0u64; 2];
                let mut best: Option<(f64, CartTest)> = None;
                for w in 0..present.len().saturating_sub(1) {
                    left[usize::from(present[w].1)] += 1;
                    let (a, b) = (present[w].0, present[w + 1].0);
                    if a == b {
                        continue;
                    }
                    let right = [total[0] - left[0], total[1] - left[1]];
                    let impurity = weighted_gini(left, right);
                    if best.as_ref().is_none_or(|x| impurity < x.0) {
                        let mid = a + (b - a) / 2.0;
                        best = Some((impurity, CartTest::Below(if mid > a { mid } else { b })));
                    }
                }
                best
            }
            FeatureKind::Categorical => {
                let mut table: BTreeMap<&str, [u64; 2]> = BTreeMap::new();
                let mut total = [0u64; 2];
                for &i in idx {
                    let (x, y) = &self.data[i];
                    table.entry(key(&x.values[f])).or_default()[usize::from(*y)] += 1;
                    total[usize::from(*y)] += 1;
                }
                if table.len() < 2 {
                    return None;
                }
                let mut best: Option<(f64, CartTest)> = None;
                for (cat, c) in &table {
                    let impurity = weighted_gini(*c, [total[0] - c[0], total[1] - c[1]]);
                    if best.as_ref().is_none_or(|x| impurity < x.0) {
                        best = Some((impurity, CartTest::Is(cat.to_string())));
                    }
                }
                best
            }
        }
    }
}

/// A single CART tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartTree {
    root: CartNode,
    default_label: bool,
}

impl CartTree {
    /// Grows a tree on `data[idx]`, drawing `max_features` candidates per node.
    fn grow(
        data: &[(FeatureVector, bool)],
        kinds: &[FeatureKind],
        idx: Vec<usize>,
        max_features: usize,
        seed: u64,
        default_label: bool,
    ) -> Self {
        let mut grower = Grower {
            data,
            kinds,
            max_features: max_features.max(1),
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        CartTree {
            root: grower.grow(idx),
            default_label,
        }
    }

    /// Plain CART on all of `data`, every feature considered at every node.
    pub fn fit(schema: &FeatureSchema, data: &[(FeatureVector, bool)]) -> Result<Self> {
        check_data(schema, data)?;
        Ok(Self::grow(
            data,
            schema.kinds(),
            (0..data.len()).collect(),
            schema.len(),
            0,
            majority(data),
        ))
    }

    pub fn predict_label(&self, x: &FeatureVector) -> bool {
        let mut node = &self.root;
        loop {
            match node {
                CartNode::Leaf(counts) => return vote(*counts, self.default_label),
                CartNode::Split {
                    feature,
                    test,
                    left,
                    right,
                } => {
                    node = if goes_left(test, &x.values[*feature]) {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn depth(n: &CartNode) -> usize {
            match n {
                CartNode::Leaf(_) => 0,
                CartNode::Split { left, right, .. } => 1 + depth(left).max(depth(right)),
            }
        }
        depth(&self.root)
    }
}

fn check_data(schema: &FeatureSchema, data: &[(FeatureVector, bool)]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingData);
    }
    data.iter().try_for_each(|(x, _)| schema.check(x))
}

/// Majority training label; ties go to `false`.
fn majority(data: &[(FeatureVector, bool)]) -> bool {
    let pos = data.iter().filter(|(_, y)| *y).count();
    pos * 2 > data.len()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    config: ForestConfig,
    schema: FeatureSchema,
    default_label: bool,
    trees: Vec<CartTree>,
}

impl RandomForest {
    /// Bootstrap samples of size `|data|`, `ceil(sqrt(F))` features per split.
    pub fn fit(schema: FeatureSchema, data: &[(FeatureVector, bool)], config: ForestConfig) -> Result<Self> {
        check_data(&schema, data)?;
        if config.n_trees == 0 {
            return Err(Error::InvalidConfig("a forest needs at least one tree".into()));
        }
        let default_label = majority(data);
        let max_features = (schema.len() as f64).sqrt().ceil() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n = data.len();
        let trees = (0..config.n_trees)
            .map(|_| {
                let tree_seed: u64 = rng.random();
                let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                CartTree::grow(data, schema.kinds(), sample, max_features, tree_seed, default_label)
            })
            .collect();
        Ok(RandomForest {
            config,
            schema,
            default_label,
            trees,
        })
    }

    /// Share of trees voting positive; the label follows the majority.
    pub fn predict(&self, x: &FeatureVector) -> Result<Score> {
        self.schema.check(x)?;
        let pos = self.trees.iter().filter(|t| t.predict_label(x)).count();
        let score = pos as f64 / self.trees.len() as f64;
        let label = match (2 * pos).cmp(&self.trees.len()) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => self.default_label,
        };
        Ok(Score { label, score })
    }

    pub fn trees(&self) -> &[CartTree] {
        &self.trees
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn config(&self) -> ForestConfig {
        self.config
    }
}
