//! ADWIN change detector over a stream of values in `[0, 1]`.
//!
//! The window is kept as an exponential histogram: row `i` holds buckets that
//! summarize `2^i` outcomes, at most `max_buckets` per row before the two
//! oldest are merged into the next row. After every update each boundary
//! between buckets is tested, oldest first, with
//!
//! ```text
//! eps_cut = sqrt(1/(2m) * ln(4W/delta)),   m = 1/(1/n0 + 1/n1)
//! ```
//!
//! where `n0`/`n1` are the older/newer part sizes and `W` is the number of
//! boundaries examined. When `|mean0 - mean1| > eps_cut` the older part is
//! dropped and the remaining window is tested again.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub const DEFAULT_DELTA: f64 = 0.002;
pub const DEFAULT_MAX_BUCKETS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct Bucket {
    sum: f64,
    count: u64,
}

/// Detected change: window means on either side of the first cut.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Change {
    pub older_mean: f64,
    pub newer_mean: f64,
}

impl Change {
    pub fn increased(&self) -> bool {
        self.newer_mean > self.older_mean
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adwin {
    delta: f64,
    max_buckets: usize,
    // rows[0] holds the newest outcomes; inside a row the front is newest
    rows: Vec<VecDeque<Bucket>>,
    total: f64,
    width: u64,
    detections: u64,
}

impl Default for Adwin {
    fn default() -> Self {
        Adwin::new(DEFAULT_DELTA)
    }
}

impl Adwin {
    pub fn new(delta: f64) -> Self {
        Adwin::with_buckets(delta, DEFAULT_MAX_BUCKETS)
    }

    /// `usize::MAX` buckets per row keeps every outcome separate, which makes
    /// every cut point of the window a candidate.
    pub fn with_buckets(delta: f64, max_buckets: usize) -> Self {
        Adwin {
            delta,
            max_buckets: max_buckets.max(1),
            rows: Vec::new(),
            total: 0.0,
            width: 0,
            detections: 0,
        }
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    pub fn mean(&self) -> f64 {
        if self.width == 0 {
            0.0
        } else {
            self.total / self.width as f64
        }
    }

    pub fn detections(&self) -> u64 {
        self.detections
    }

    /// Adds one outcome and reports the first change found, if any.
    pub fn update(&mut self, value: f64) -> Option<Change> {
        self.insert(value);
        let mut first = None;
        while let Some(change) = self.cut() {
            first.get_or_insert(change);
        }
        if first.is_some() {
            self.detections += 1;
        }
        first
    }

    fn insert(&mut self, value: f64) {
        if self.rows.is_empty() {
            self.rows.push(VecDeque::new());
        }
        self.rows[0].push_front(Bucket { sum: value, count: 1 });
        self.total += value;
        self.width += 1;
        let mut row = 0;
        while self.rows[row].len() > self.max_buckets {
            let a = self.rows[row].pop_back().expect("row over capacity");
            let b = self.rows[row].pop_back().expect("row over capacity");
            if row + 1 == self.rows.len() {
                self.rows.push(VecDeque::new());
            }
            self.rows[row + 1].push_front(Bucket {
                sum: a.sum + b.sum,
                count: a.count + b.count,
            });
            row += 1;
        }
    }

    /// Buckets from oldest to newest.
    fn oldest_first(&self) -> impl Iterator<Item = &Bucket> {
        self.rows.iter().rev().flat_map(|row| row.iter().rev())
    }

    fn cut(&mut self) -> Option<Change> {
        let buckets = self.rows.iter().map(VecDeque::len).sum::<usize>();
        if buckets < 2 {
            return None;
        }
        let boundaries = (buckets - 1) as f64;
        let log_term = (4.0 * boundaries / self.delta).ln();
        let (mut n0, mut s0) = (0u64, 0.0);
        let mut dropped = 0usize;
        let mut found = None;
        for (k, bucket) in self.oldest_first().take(buckets - 1).enumerate() {
            n0 += bucket.count;
            s0 += bucket.sum;
            let n1 = self.width - n0;
            let s1 = self.total - s0;
            let (mean0, mean1) = (s0 / n0 as f64, s1 / n1 as f64);
            let m = 1.0 / (1.0 / n0 as f64 + 1.0 / n1 as f64);
            let eps = (log_term / (2.0 * m)).sqrt();
            if (mean0 - mean1).abs() > eps {
                dropped = k + 1;
                found = Some(Change {
                    older_mean: mean0,
                    newer_mean: mean1,
                });
                break;
            }
        }
        found.inspect(|_| self.drop_oldest(dropped))
    }

    fn drop_oldest(&mut self, mut n: usize) {
        while n > 0 {
            let row = self.rows.last_mut().expect("dropping from empty window");
            match row.pop_back() {
                Some(bucket) => {
                    self.total -= bucket.sum;
                    self.width -= bucket.count;
                    n -= 1;
                }
                None => {
                    self.rows.pop();
                }
            }
        }
        while self.rows.last().is_some_and(VecDeque::is_empty) {
            self.rows.pop();
        }
    }
}
