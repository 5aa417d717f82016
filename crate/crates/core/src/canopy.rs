//! Two-threshold canopy clustering over frequency vectors.
//!
//! `build` is the classical procedure: take the next remaining item as a
//! center, put every remaining item with cheap (L1) distance `< t1` in its
//! canopy, and drop from the pool every item within `t2` (the center included).
//! Canopies overlap. The precise (Euclidean) metric is used by [`CanopyModel::assign`]
//! to pick the single best canopy for a query.
//!
//! Centers never move once created. `insert` only adds members or opens a new
//! canopy, so a canopy index keeps naming the same region for the model's life.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::FeatureVector;
use crate::error::{Error, Result};
use crate::persist;

const SAMPLE_SIZE: usize = 200;

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PickOrder {
    /// Centers are taken in input order.
    #[default]
    Input,
    /// Centers are taken in a seeded random order.
    Seeded(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Canopy {
    pub center: Vec<f64>,
    pub member_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanopyModel {
    t1: f64,
    t2: f64,
    schema_id: u64,
    canopies: Vec<Canopy>,
}

/// Result of [`CanopyModel::build`]: the model and, per canopy, the indices
/// of the input items that joined it.
#[derive(Clone, Debug)]
pub struct Clustering {
    pub model: CanopyModel,
    pub members: Vec<Vec<usize>>,
}

impl CanopyModel {
    pub fn build(items: &[FeatureVector], t1: f64, t2: f64) -> Result<Clustering> {
        Self::build_with_order(items, t1, t2, PickOrder::Input)
    }

    pub fn build_with_order(items: &[FeatureVector], t1: f64, t2: f64, order: PickOrder) -> Result<Clustering> {
        check_thresholds(t1, t2)?;
        let first = items.first().ok_or(Error::NoItems)?;
        let schema_id = first.schema_id;
        for item in items {
            if item.schema_id != schema_id {
                return Err(Error::SchemaMismatch {
                    expected: schema_id,
                    got: item.schema_id,
                });
            }
        }

        // Identical vectors always travel together (their distance is 0 <= t2),
        // so the procedure runs on distinct points and expands afterwards.
        let mut distinct: Vec<Vec<f64>> = Vec::new();
        let mut copies: Vec<Vec<usize>> = Vec::new();
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        for (i, item) in items.iter().enumerate() {
            let point = item.numeric();
            let key: Vec<u64> = point.iter().map(|v| v.to_bits()).collect();
            let slot = *seen.entry(key).or_insert_with(|| {
                distinct.push(point);
                copies.push(Vec::new());
                distinct.len() - 1
            });
            copies[slot].push(i);
        }

        let mut pick: Vec<usize> = (0..distinct.len()).collect();
        if let PickOrder::Seeded(seed) = order {
            pick.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }

        let mut in_pool = vec![true; distinct.len()];
        let mut canopies = Vec::new();
        let mut members = Vec::new();
        for &c in &pick {
            if !in_pool[c] {
                continue;
            }
            let center = &distinct[c];
            let mut joined = Vec::new();
            for &p in &pick {
                if !in_pool[p] {
                    continue;
                }
                let d = l1(center, &distinct[p]);
                if d < t1 || p == c {
                    joined.extend_from_slice(&copies[p]);
                }
                if d <= t2 || p == c {
                    in_pool[p] = false;
                }
            }
            joined.sort_unstable();
            canopies.push(Canopy {
                center: center.clone(),
                member_count: joined.len(),
            });
            members.push(joined);
        }

        Ok(Clustering {
            model: CanopyModel {
                t1,
                t2,
                schema_id,
                canopies,
            },
            members,
        })
    }

    /// Canopy indices the item joined; opens a new canopy when none is within `t1`.
    pub fn insert(&mut self, item: &FeatureVector) -> Result<Vec<usize>> {
        self.check(item)?;
        let point = item.numeric();
        let mut hits = Vec::new();
        for (k, canopy) in self.canopies.iter_mut().enumerate() {
            if l1(&canopy.center, &point) < self.t1 {
                canopy.member_count += 1;
                hits.push(k);
            }
        }
        if hits.is_empty() {
            self.canopies.push(Canopy {
                center: point,
                member_count: 1,
            });
            hits.push(self.canopies.len() - 1);
        }
        Ok(hits)
    }

    /// Nearest canopy by Euclidean distance to its center, lowest index on ties.
    pub fn assign(&self, item: &FeatureVector) -> Result<usize> {
        if self.canopies.is_empty() {
            return Err(Error::EmptyModel);
        }
        self.check(item)?;
        let point = item.numeric();
        let mut best = (0, f64::INFINITY);
        for (k, canopy) in self.canopies.iter().enumerate() {
            let d = euclidean(&canopy.center, &point);
            if d < best.1 {
                best = (k, d);
            }
        }
        Ok(best.0)
    }

    /// Canopies whose center is within `t1` of the item, without modifying the model.
    pub fn covering(&self, item: &FeatureVector) -> Result<Vec<usize>> {
        self.check(item)?;
        let point = item.numeric();
        Ok(self
            .canopies
            .iter()
            .enumerate()
            .filter(|(_, c)| l1(&c.center, &point) < self.t1)
            .map(|(k, _)| k)
            .collect())
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    pub fn schema_id(&self) -> u64 {
        self.schema_id
    }

    pub fn canopies(&self) -> &[Canopy] {
        &self.canopies
    }

    pub fn len(&self) -> usize {
        self.canopies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canopies.is_empty()
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        persist::save("canopy", self, out)
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        let model: CanopyModel = persist::load("canopy", input)?;
        check_thresholds(model.t1, model.t2)?;
        Ok(model)
    }

    fn check(&self, item: &FeatureVector) -> Result<()> {
        if item.schema_id != self.schema_id {
            return Err(Error::SchemaMismatch {
                expected: self.schema_id,
                got: item.schema_id,
            });
        }
        Ok(())
    }
}

fn check_thresholds(t1: f64, t2: f64) -> Result<()> {
    if !(t2 >= 0.0 && t1 > t2 && t1.is_finite()) {
        return Err(Error::BadThresholds { t1, t2 });
    }
    Ok(())
}

/// `(t1, t2)` as the 75th and 25th percentiles of pairwise L1 distances over
/// an evenly strided sample of at most 200 items.
pub fn default_thresholds(items: &[FeatureVector]) -> Result<(f64, f64)> {
    if items.is_empty() {
        return Err(Error::NoItems);
    }
    let stride = items.len().div_ceil(SAMPLE_SIZE);
    let sample: Vec<Vec<f64>> = items.iter().step_by(stride).map(FeatureVector::numeric).collect();
    let mut dists = Vec::with_capacity(sample.len() * sample.len() / 2);
    for i in 0..sample.len() {
        for j in i + 1..sample.len() {
            dists.push(l1(&sample[i], &sample[j]));
        }
    }
    if dists.is_empty() {
        return Ok((1.0, 0.0));
    }
    dists.sort_by(f64::total_cmp);
    let pct = |p: f64| dists[((dists.len() - 1) as f64 * p).round() as usize];
    let t2 = pct(0.25);
    let mut t1 = pct(0.75);
    if t1 <= t2 {
        t1 = t2 + 1.0;
    }
    Ok((t1, t2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> FeatureVector {
        FeatureVector {
            values: xs.iter().map(|x| crate::encoding::FeatureValue::Numeric(*x)).collect(),
            schema_id: 7,
        }
    }

    /// The textbook procedure, written out on plain points without dedup.
    fn textbook(points: &[Vec<f64>], t1: f64, t2: f64) -> Vec<(usize, Vec<usize>)> {
        let mut pool: Vec<usize> = (0..points.len()).collect();
        let mut out = Vec::new();
        while let Some(&c) = pool.first() {
            let members: Vec<usize> = pool
                .iter()
                .copied()
                .filter(|&p| p == c || l1(&points[c], &points[p]) < t1)
                .collect();
            pool.retain(|&p| p != c && l1(&points[c], &points[p]) > t2);
            out.push((c, members));
        }
        out
    }

    #[test]
    fn three_points() {
        let items = [v(&[0.0]), v(&[1.0]), v(&[5.0])];
        let c = CanopyModel::build(&items, 2.0, 0.5).unwrap();
        assert_eq!(c.members, [vec![0, 1], vec![1], vec![2]]);
        let centers: Vec<_> = c.model.canopies().iter().map(|k| k.center[0]).collect();
        assert_eq!(centers, [0.0, 1.0, 5.0]);
    }

    #[test]
    fn degenerate_inputs() {
        let one = CanopyModel::build(&[v(&[3.0, 1.0])], 2.0, 1.0).unwrap();
        assert_eq!(one.members, [vec![0]]);
        let same = CanopyModel::build(&vec![v(&[1.0, 1.0]); 5], 2.0, 1.0).unwrap();
        assert_eq!(same.members, [vec![0, 1, 2, 3, 4]]);
        assert!(matches!(CanopyModel::build(&[], 2.0, 1.0), Err(Error::NoItems)));
        assert!(matches!(
            CanopyModel::build(&[v(&[0.0])], 1.0, 1.0),
            Err(Error::BadThresholds { .. })
        ));
    }

    #[test]
    fn insert_and_assign() {
        let items = [v(&[0.0, 0.0]), v(&[10.0, 0.0]), v(&[0.0, 10.0])];
        let mut model = CanopyModel::build(&items, 3.0, 1.0).unwrap().model;
        assert_eq!(model.insert(&v(&[10.0, 0.0])).unwrap(), [1]);
        assert_eq!(model.canopies()[1].member_count, 2);
        assert_eq!(model.insert(&v(&[50.0, 50.0])).unwrap(), [3]);
        assert_eq!(model.len(), 4);

        assert_eq!(model.assign(&v(&[0.0, 10.0])).unwrap(), 2);
        // equidistant from every center
        assert_eq!(model.assign(&v(&[5.0, 5.0])).unwrap(), 0);
        let tie = CanopyModel::build(&[v(&[0.0]), v(&[4.0]), v(&[10.0])], 1.0, 0.5)
            .unwrap()
            .model;
        assert_eq!(tie.assign(&v(&[7.0])).unwrap(), 1);

        let other = FeatureVector {
            values: vec![],
            schema_id: 8,
        };
        assert!(matches!(model.insert(&other), Err(Error::SchemaMismatch { .. })));
    }

    #[test]
    fn serialization_round_trip() {
        let items = [v(&[0.0, 1.0]), v(&[4.0, 2.0])];
        let model = CanopyModel::build(&items, 3.0, 1.0).unwrap().model;
        let mut buf = Vec::new();
        model.save(&mut buf).unwrap();
        assert_eq!(CanopyModel::load(buf.as_slice()).unwrap(), model);
    }

    #[test]
    fn default_thresholds_are_ordered() {
        let items: Vec<_> = (0..500).map(|i| v(&[(i % 13) as f64, (i % 7) as f64])).collect();
        let (t1, t2) = default_thresholds(&items).unwrap();
        assert!(t1 > t2 && t2 >= 0.0);
        let (t1, t2) = default_thresholds(&vec![v(&[1.0]); 10]).unwrap();
        assert_eq!((t1, t2), (1.0, 0.0));
    }

    fn points(max_len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0u8..6, 3), 1..max_len)
            .prop_map(|ps| ps.into_iter().map(|p| p.into_iter().map(f64::from).collect()).collect())
    }

    proptest! {
        #[test]
        fn matches_textbook_trace(ps in points(60), t2 in 0.0f64..3.0, gap in 0.5f64..4.0) {
            let items: Vec<_> = ps.iter().map(|p| v(p)).collect();
            let built = CanopyModel::build(&items, t2 + gap, t2).unwrap();
            let expected = textbook(&ps, t2 + gap, t2);
            prop_assert_eq!(built.members.len(), expected.len());
            for (k, (center, members)) in expected.iter().enumerate() {
                prop_assert_eq!(&built.model.canopies()[k].center, &ps[*center]);
                prop_assert_eq!(&built.members[k], members);
            }
        }

        #[test]
        fn coverage_and_separation(ps in points(120), t2 in 0.0f64..3.0, gap in 0.5f64..4.0, seed in any::<u64>()) {
            let items: Vec<_> = ps.iter().map(|p| v(p)).collect();
            let built = CanopyModel::build_with_order(&items, t2 + gap, t2, PickOrder::Seeded(seed)).unwrap();
            let mut covered = vec![false; items.len()];
            for m in built.members.iter().flatten() {
                covered[*m] = true;
            }
            prop_assert!(covered.iter().all(|c| *c));
            let centers = built.model.canopies();
            for i in 0..centers.len() {
                for j in i + 1..centers.len() {
                    prop_assert!(l1(&centers[i].center, &centers[j].center) > t2);
                }
            }
        }

        #[test]
        fn inserts_always_land(ps in points(200), extra in points(200)) {
            let items: Vec<_> = ps.iter().map(|p| v(p)).collect();
            let mut model = CanopyModel::build(&items, 2.5, 1.0).unwrap().model;
            for p in &extra {
                let hits = model.insert(&v(p)).unwrap();
                prop_assert!(!hits.is_empty());
                prop_assert!(hits.iter().all(|k| *k < model.len()));
            }
        }

        #[test]
        fn assign_is_argmin(ps in points(40), qs in points(50)) {
            let items: Vec<_> = ps.iter().map(|p| v(p)).collect();
            let model = CanopyModel::build(&items, 2.0, 0.5).unwrap().model;
            for q in &qs {
                let dists: Vec<f64> = model.canopies().iter().map(|c| euclidean(&c.center, q)).collect();
                let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
                let expected = dists.iter().position(|d| *d == min).unwrap();
                prop_assert_eq!(model.assign(&v(q)).unwrap(), expected);
                prop_assert_eq!(model.assign(&v(q)).unwrap(), expected);
            }
        }
    }
}
